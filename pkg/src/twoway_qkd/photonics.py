"""Physical layer: photon pulses, Alice's wavelength filter, the 50/50
splitter check station and non-number-resolving time-windowed detectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .chance import Chooser
from .qstate import Basis, Qubit, label_for, ket, measure_prob

LEGIT_WAVELENGTH_NM = 1550.0
INVISIBLE_WAVELENGTH_NM = 1310.0


@dataclass(frozen=True, slots=True)
class Photon:
    wavelength_nm: float
    delay_ns: float
    state: Qubit

    def __post_init__(self) -> None:
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be > 0")
        if not (math.isfinite(self.delay_ns) and self.delay_ns >= 0):
            raise ValueError("delay_ns must be finite and >= 0")

    @property
    def signature(self) -> tuple[float, float]:
        return (self.wavelength_nm, self.delay_ns)


@dataclass(frozen=True, slots=True)
class Pulse:
    photons: tuple[Photon, ...] = ()

    def __len__(self) -> int:
        return len(self.photons)


VACUUM = Pulse()


@dataclass(frozen=True)
class FilterSpec:
    pass_min_nm: float = 1549.0
    pass_max_nm: float = 1551.0
    in_band_transmission: float = 1.0

    def __post_init__(self) -> None:
        if not self.pass_min_nm < self.pass_max_nm:
            raise ValueError("filter: pass_min_nm must be < pass_max_nm")
        if not 0.0 <= self.in_band_transmission <= 1.0:
            raise ValueError("filter: in_band_transmission must be in [0, 1]")

    def in_band(self, wavelength_nm: float) -> bool:
        return self.pass_min_nm <= wavelength_nm <= self.pass_max_nm


@dataclass(frozen=True)
class DetectorSpec:
    """Single-photon detector pair settings.

    `response_min_nm`/`response_max_nm` bound the wavelengths the detectors
    register at all; photons outside never click.
    """

    time_window_ns: float = 100.0
    dead_time_ns: float = 50.0
    efficiency: float = 1.0
    response_min_nm: float = 1500.0
    response_max_nm: float = 1600.0

    def __post_init__(self) -> None:
        for name in ("time_window_ns", "dead_time_ns", "efficiency", "response_min_nm", "response_max_nm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"detector: {name} must be finite")
        if not self.time_window_ns > 0:
            raise ValueError("detector: time_window_ns must be > 0")
        if self.dead_time_ns < 0:
            raise ValueError("detector: dead_time_ns must be >= 0")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("detector: efficiency must be in [0, 1]")
        if not self.response_min_nm < self.response_max_nm:
            raise ValueError("detector: response_min_nm must be < response_max_nm")

    def sees(self, ph: Photon) -> bool:
        return 0.0 <= ph.delay_ns <= self.time_window_ns and (
            self.response_min_nm <= ph.wavelength_nm <= self.response_max_nm
        )


@dataclass(frozen=True, slots=True)
class Click:
    arm: Basis
    detector_bit: int
    time_ns: float


@dataclass(frozen=True, slots=True)
class CheckResult:
    clicks: tuple[Click, ...]
    multiphoton_flag: bool
    sample: Optional[tuple[Basis, int]]


def legit_photon(state: Qubit) -> Photon:
    return Photon(LEGIT_WAVELENGTH_NM, 0.0, state)


def measure_photon(ph: Photon, basis: Basis, chooser: Chooser) -> int:
    """Measure one photon's polarization, consuming one choice."""
    p0 = measure_prob(ph.state, basis, 0)
    return chooser.pick((p0, 1.0 - p0))


def collapse(ph: Photon, basis: Basis, bit: int) -> Photon:
    return replace(ph, state=ket(label_for(basis, bit)))


def filter_pulse(p: Pulse, f: FilterSpec, chooser: Chooser) -> tuple[Pulse, int]:
    """Drop out-of-band photons; in-band photons survive the transmission coin."""
    kept = []
    t = f.in_band_transmission
    for ph in p.photons:
        if f.in_band(ph.wavelength_nm) and chooser.pick((t, 1.0 - t)) == 0:
            kept.append(ph)
    return Pulse(tuple(kept)), len(p.photons) - len(kept)


def split_route(ph: Photon, chooser: Chooser) -> Basis:
    """50/50 splitter: Z arm on the first half of the draw, X arm otherwise."""
    return Basis.Z if chooser.pick((0.5, 0.5)) == 0 else Basis.X


def _detected(ph: Photon, d: DetectorSpec, chooser: Chooser) -> bool:
    e = d.efficiency
    return d.sees(ph) and chooser.pick((e, 1.0 - e)) == 0


def resolve_clicks(raw: Iterable[Click], dead_time_ns: float) -> tuple[Click, ...]:
    """Clicks a non-number-resolving detector bank actually registers.

    A detector (arm, bit) ignores any photon arriving within `dead_time_ns` of
    its last registered click. Result is ordered by time, ties by input order.
    """
    last: dict[tuple[Basis, int], float] = {}
    out = []
    for c in sorted(raw, key=lambda c: c.time_ns):
        key = (c.arm, c.detector_bit)
        t0 = last.get(key)
        if t0 is not None and c.time_ns - t0 <= dead_time_ns:
            continue
        last[key] = c.time_ns
        out.append(c)
    return tuple(out)


def check_station(p: Pulse, d: DetectorSpec, chooser: Chooser) -> CheckResult:
    """Split the pulse 50/50 into a Z-basis arm and an X-basis arm.

    More than one registered click means more than one photon was present.
    """
    raw = []
    for ph in p.photons:
        if not _detected(ph, d, chooser):
            continue
        arm = split_route(ph, chooser)
        raw.append(Click(arm, measure_photon(ph, arm, chooser), ph.delay_ns))
    clicks = resolve_clicks(raw, d.dead_time_ns)
    sample = (clicks[0].arm, clicks[0].detector_bit) if len(clicks) == 1 else None
    return CheckResult(clicks, len(clicks) >= 2, sample)


def detect_single(p: Pulse, b: Basis, d: DetectorSpec, chooser: Chooser) -> tuple[Optional[int], bool]:
    """Measure every visible photon in basis `b` on a two-detector bank.

    Returns the bit of the earliest registered click (None if nothing
    clicked) and whether more than one click registered.
    """
    raw = [Click(b, measure_photon(ph, b, chooser), ph.delay_ns) for ph in p.photons if _detected(ph, d, chooser)]
    clicks = resolve_clicks(raw, d.dead_time_ns)
    if not clicks:
        return None, False
    return clicks[0].detector_bit, len(clicks) >= 2
