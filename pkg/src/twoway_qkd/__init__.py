"""Two-way (ping-pong) QKD simulator with Trojan horse attacks and defenses."""

from .adversary import BrightPulse, DelayPhoton, EveStrategy, InterceptResend, InvisiblePhoton, NoEve
from .engine import ExactScenario, Report, SimConfig, exact_enumerate, run_simulation

__all__ = [
    "BrightPulse",
    "DelayPhoton",
    "EveStrategy",
    "ExactScenario",
    "InterceptResend",
    "InvisiblePhoton",
    "NoEve",
    "Report",
    "SimConfig",
    "exact_enumerate",
    "run_simulation",
]
