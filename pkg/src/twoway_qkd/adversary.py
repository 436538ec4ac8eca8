"""Eavesdropping strategies.

Each strategy acts twice per round: on the forward leg (Bob to Alice) it may
tamper with or add to the pulse, and on the backward leg (Alice to Bob) it
recovers its probe photons and guesses Alice's operation from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, Mapping, Optional

from .chance import Chooser
from .photonics import INVISIBLE_WAVELENGTH_NM, LEGIT_WAVELENGTH_NM, Photon, Pulse, collapse, measure_photon
from .qstate import Basis, StateLabel, ket


@dataclass(frozen=True, slots=True)
class EveMemo:
    attacked: bool = False
    signature: Optional[tuple[float, float]] = None
    n_probes: int = 0
    probe_state: Optional[StateLabel] = None


NO_MEMO = EveMemo()


@dataclass(frozen=True)
class EveStrategy:
    """Base class; the passive (absent) eavesdropper."""

    name: ClassVar[str] = "honest"
    attack_rate: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.attack_rate <= 1.0:
            raise ValueError("attack_rate must be in [0, 1]")

    def _attack_coin(self, chooser: Chooser) -> bool:
        return chooser.pick((self.attack_rate, 1.0 - self.attack_rate)) == 0

    def forward(self, p: Pulse, chooser: Chooser) -> tuple[Pulse, EveMemo]:
        return p, NO_MEMO

    def backward(self, p: Pulse, memo: EveMemo, chooser: Chooser) -> tuple[Pulse, Optional[int], bool]:
        """Return (pulse for Bob, guess of Alice's op bit, whether the guess was informed)."""
        return p, None, False

    def params(self) -> dict:
        return {"attack_rate": self.attack_rate}


NoEve = EveStrategy


@dataclass(frozen=True)
class InterceptResend(EveStrategy):
    """Measure Bob's photon in a random basis and resend the collapsed state."""

    name: ClassVar[str] = "intercept-resend"

    def forward(self, p: Pulse, chooser: Chooser) -> tuple[Pulse, EveMemo]:
        if not p.photons or not self._attack_coin(chooser):
            return p, NO_MEMO
        basis = Basis.Z if chooser.pick((0.5, 0.5)) == 0 else Basis.X
        first = p.photons[0]
        bit = measure_photon(first, basis, chooser)
        return Pulse((collapse(first, basis, bit),) + p.photons[1:]), EveMemo(attacked=True)


@dataclass(frozen=True)
class _Trojan(EveStrategy):
    """Additive attack: probe photons ride along with Bob's photon."""

    probe_state: StateLabel = StateLabel.PLUS_Z

    def _probes(self) -> tuple[Photon, ...]:
        raise NotImplementedError

    def forward(self, p: Pulse, chooser: Chooser) -> tuple[Pulse, EveMemo]:
        if not self._attack_coin(chooser):
            return p, NO_MEMO
        probes = self._probes()
        memo = EveMemo(True, probes[0].signature, len(probes), self.probe_state)
        return Pulse(p.photons + probes), memo

    def backward(self, p: Pulse, memo: EveMemo, chooser: Chooser) -> tuple[Pulse, Optional[int], bool]:
        if not memo.attacked:
            return p, None, False
        # Probes were appended after Bob's photon, so take matches from the end;
        # this keeps separation exact even if a probe shares the legit signature.
        kept = list(p.photons)
        mine = []
        for i in range(len(kept) - 1, -1, -1):
            if len(mine) == memo.n_probes:
                break
            if kept[i].signature == memo.signature:
                mine.append(kept.pop(i))
        passed = Pulse(tuple(kept))
        if not mine:
            return passed, chooser.pick((0.5, 0.5)), False
        # U maps every probe state to an orthogonal one, so one probe suffices.
        probe = mine[-1]
        outcome = measure_photon(probe, memo.probe_state.basis, chooser)
        return passed, int(outcome != memo.probe_state.bit), True

    def params(self) -> dict:
        return {"attack_rate": self.attack_rate, "probe_state": self.probe_state.value}


@dataclass(frozen=True)
class BrightPulse(_Trojan):
    """General Trojan horse: m probe photons sent into Alice's device."""

    name: ClassVar[str] = "bright-pulse"
    m: int = 3
    probe_delay_ns: float = 5.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.m < 1:
            raise ValueError("pulse m must be >= 1")
        if not (math.isfinite(self.probe_delay_ns) and self.probe_delay_ns >= 0):
            raise ValueError("probe_delay_ns must be finite and >= 0")

    def _probes(self) -> tuple[Photon, ...]:
        ph = Photon(LEGIT_WAVELENGTH_NM, self.probe_delay_ns, ket(self.probe_state))
        return (ph,) * self.m

    def params(self) -> dict:
        return {**super().params(), "m": self.m, "probe_delay_ns": self.probe_delay_ns}


@dataclass(frozen=True)
class DelayPhoton(_Trojan):
    """One in-band fake photon trailing Bob's photon inside the time window."""

    name: ClassVar[str] = "delay-photon"
    probe_delay_ns: float = 5.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if not (math.isfinite(self.probe_delay_ns) and self.probe_delay_ns >= 0):
            raise ValueError("probe_delay_ns must be finite and >= 0")

    def _probes(self) -> tuple[Photon, ...]:
        return (Photon(LEGIT_WAVELENGTH_NM, self.probe_delay_ns, ket(self.probe_state)),)

    def params(self) -> dict:
        return {**super().params(), "probe_delay_ns": self.probe_delay_ns}


@dataclass(frozen=True)
class InvisiblePhoton(_Trojan):
    """One out-of-band photon Alice's detectors do not register."""

    name: ClassVar[str] = "invisible-photon"
    probe_wavelength_nm: float = INVISIBLE_WAVELENGTH_NM

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.probe_wavelength_nm > 0:
            raise ValueError("probe_wavelength_nm must be > 0")

    def _probes(self) -> tuple[Photon, ...]:
        return (Photon(self.probe_wavelength_nm, 0.0, ket(self.probe_state)),)

    def params(self) -> dict:
        return {**super().params(), "probe_wavelength_nm": self.probe_wavelength_nm}


STRATEGIES: Mapping[str, type[EveStrategy]] = {
    cls.name: cls for cls in (NoEve, InterceptResend, BrightPulse, DelayPhoton, InvisiblePhoton)
}


def eve_forward(p: Pulse, s: EveStrategy, chooser: Chooser) -> tuple[Pulse, EveMemo]:
    return s.forward(p, chooser)


def eve_backward(p: Pulse, memo: EveMemo, s: EveStrategy, chooser: Chooser) -> tuple[Pulse, Optional[int], bool]:
    return s.backward(p, memo, chooser)


def mutual_information(joint: Mapping[tuple[int, int], int]) -> Optional[float]:
    """Eve's information about Alice's op bit, in bits, from (op, guess) counts.

    Alice draws her operation uniformly, so the input prior is fixed at 1/2
    and only the guess channel P(guess | op) is estimated from the counts:
    I = H(E) - H(E | A). A deterministic channel gives exactly 1.0 and an
    independent one gives ~0. Returns None when either op value is unobserved.
    """
    rows = []
    for a in (0, 1):
        n = joint.get((a, 0), 0) + joint.get((a, 1), 0)
        if n == 0:
            return None
        rows.append([joint.get((a, 0), 0) / n, joint.get((a, 1), 0) / n])
    marginal = [0.5 * (rows[0][e] + rows[1][e]) for e in (0, 1)]
    h_e = _entropy(marginal)
    h_e_given_a = 0.5 * (_entropy(rows[0]) + _entropy(rows[1]))
    return min(1.0, max(0.0, h_e - h_e_given_a))


def _entropy(ps) -> float:
    return -sum(p * math.log2(p) for p in ps if p > 0.0)
