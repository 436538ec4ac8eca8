"""Two-way QKD rounds: Bob prepares, Alice checks or encodes, Bob measures.

A round is a pure function of its configuration and a `Chooser`; seeded
choosers give Monte Carlo transcripts and the enumeration oracle reuses the
same code path.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence, Union

from .adversary import NO_MEMO, EveStrategy, NoEve
from .chance import Chooser, RandomChooser
from .photonics import (
    VACUUM,
    CheckResult,
    Click,
    DetectorSpec,
    FilterSpec,
    Photon,
    Pulse,
    check_station,
    detect_single,
    filter_pulse,
    legit_photon,
    measure_photon,
)
from .qstate import Basis, OpLabel, StateLabel, apply, ket

LABELS = (StateLabel.PLUS_Z, StateLabel.MINUS_Z, StateLabel.PLUS_X, StateLabel.MINUS_X)
_QUARTERS = (0.25, 0.25, 0.25, 0.25)


@dataclass(frozen=True)
class ProtocolConfig:
    """Per-round knobs shared by Alice and Bob."""

    check_fraction: float = 0.5
    filter_on: bool = False
    splitter_on: bool = False
    filter: FilterSpec = FilterSpec()
    detector: DetectorSpec = DetectorSpec()

    def __post_init__(self) -> None:
        if not 0.0 <= self.check_fraction <= 1.0:
            raise ValueError("check_fraction must be in [0, 1]")


@dataclass(frozen=True, slots=True)
class Preparation:
    label: StateLabel


@dataclass(frozen=True, slots=True)
class CheckAction:
    result: CheckResult
    # "both-arms" with the splitter station, "single-basis" without it
    basis_policy: str
    blocked_count: int = 0


@dataclass(frozen=True, slots=True)
class CodeAction:
    op: OpLabel
    outgoing: Pulse
    blocked_count: int = 0


AliceAction = Union[CheckAction, CodeAction]


@dataclass(frozen=True, slots=True)
class RoundRecord:
    index: int
    prep: StateLabel
    mode: str  # "check" | "code"
    op_bit: Optional[int]
    check_sample: Optional[tuple[Basis, int]]
    bob_outcome: Optional[int]
    multiphoton_flag: bool
    bob_anomaly_flag: bool
    blocked_count: int
    eve_guess: Optional[int]
    eve_informed: bool
    eve_attacked: bool

    @property
    def detected(self) -> bool:
        return self.multiphoton_flag or self.bob_anomaly_flag

    @property
    def bob_key_bit(self) -> Optional[int]:
        if self.bob_outcome is None:
            return None
        return int(self.bob_outcome != self.prep.bit)


def bob_prepare(chooser: Chooser) -> tuple[Preparation, Pulse]:
    label = LABELS[chooser.pick(_QUARTERS)]
    return Preparation(label), Pulse((legit_photon(ket(label)),))


def _single_basis_check(p: Pulse, d: DetectorSpec, chooser: Chooser) -> CheckResult:
    # One measuring basis, one detector pair: only the earliest visible photon
    # is registered, so extra photons cannot be noticed.
    basis = Basis.Z if chooser.pick((0.5, 0.5)) == 0 else Basis.X
    visible = [ph for ph in p.photons if d.sees(ph)]
    if not visible:
        return CheckResult((), False, None)
    first = min(visible, key=lambda ph: ph.delay_ns)
    if chooser.pick((d.efficiency, 1.0 - d.efficiency)) != 0:
        return CheckResult((), False, None)
    bit = measure_photon(first, basis, chooser)
    return CheckResult((Click(basis, bit, first.delay_ns),), False, (basis, bit))


def alice_stage(
    incoming: Pulse,
    cfg: ProtocolConfig,
    chooser: Chooser,
    forced_op: Optional[OpLabel] = None,
) -> AliceAction:
    c = cfg.check_fraction
    checking = chooser.pick((c, 1.0 - c)) == 0
    blocked = 0
    if cfg.filter_on:
        incoming, blocked = filter_pulse(incoming, cfg.filter, chooser)
    if checking:
        if cfg.splitter_on:
            return CheckAction(check_station(incoming, cfg.detector, chooser), "both-arms", blocked)
        return CheckAction(_single_basis_check(incoming, cfg.detector, chooser), "single-basis", blocked)
    op = forced_op if forced_op is not None else (OpLabel.I, OpLabel.U)[chooser.pick((0.5, 0.5))]
    if op is OpLabel.U:
        incoming = Pulse(tuple(Photon(ph.wavelength_nm, ph.delay_ns, apply(op, ph.state)) for ph in incoming.photons))
    return CodeAction(op, incoming, blocked)


def bob_final_measure(
    returning: Pulse, prep: Preparation, det: DetectorSpec, chooser: Chooser
) -> tuple[Optional[int], bool]:
    return detect_single(returning, prep.label.basis, det, chooser)


def play_round(cfg: ProtocolConfig, eve: EveStrategy, chooser: Chooser, index: int = 0) -> RoundRecord:
    """Bob -> Eve -> Alice -> Eve -> Bob, driven entirely by `chooser`."""
    prep, pulse = bob_prepare(chooser)
    pulse, memo = eve.forward(pulse, chooser)
    action = alice_stage(pulse, cfg, chooser)
    if isinstance(action, CheckAction):
        # nothing travels back on a checking round
        _, guess, informed = eve.backward(VACUUM, memo, chooser)
        return RoundRecord(
            index, prep.label, "check", None, action.result.sample, None,
            action.result.multiphoton_flag, False, action.blocked_count,
            guess, informed, memo.attacked,
        )
    returning, guess, informed = eve.backward(action.outgoing, memo, chooser)
    outcome, anomaly = bob_final_measure(returning, prep, cfg.detector, chooser)
    return RoundRecord(
        index, prep.label, "code", action.op.bit, None, outcome,
        False, anomaly, action.blocked_count, guess, informed, memo.attacked,
    )


def run_round(cfg: ProtocolConfig, eve: Optional[EveStrategy], round_seed: int, index: int = 0) -> RoundRecord:
    return play_round(cfg, eve if eve is not None else NoEve(), RandomChooser(round_seed), index)


class CheckSample(NamedTuple):
    index: int
    expected: int
    observed: int


class Sifted(NamedTuple):
    alice_key: list[int]
    bob_key: list[int]
    check_samples: list[CheckSample]


def sift(records: Iterable[RoundRecord]) -> Sifted:
    alice, bob, samples = [], [], []
    for r in records:
        if r.mode == "code":
            if r.bob_outcome is not None:
                alice.append(r.op_bit)
                bob.append(r.bob_key_bit)
        elif r.check_sample is not None and r.check_sample[0] is r.prep.basis:
            samples.append(CheckSample(r.index, r.prep.bit, r.check_sample[1]))
    return Sifted(alice, bob, samples)


def round_events(r: RoundRecord) -> tuple[str, ...]:
    """Observable events of one round, as counted by statistics and the oracle.

    Joint events use "@" (e.g. "flag@+z" = checking round with the multiphoton
    flag and preparation |+z>); "eve:ae" is an attacked coding round where
    Alice's op bit is a and Eve guessed e.
    """
    ev = ["round", f"prep@{r.prep.value}"]
    if r.detected:
        ev.append("detected")
    if r.eve_attacked:
        ev.append("attacked")
    if r.mode == "check":
        ev += ["check", f"check@{r.prep.value}"]
        if r.multiphoton_flag:
            ev += ["flag", f"flag@{r.prep.value}"]
        if r.eve_attacked:
            ev.append("attacked_check")
            if r.detected:
                ev.append("attacked_check_detected")
        if r.check_sample is not None and r.check_sample[0] is r.prep.basis:
            ev.append("check_matched")
            if r.check_sample[1] != r.prep.bit:
                ev.append("check_error")
    else:
        ev.append("code")
        if r.bob_outcome is None:
            ev.append("lost")
        else:
            ev.append("key")
            if r.bob_key_bit != r.op_bit:
                ev.append("key_error")
        if r.eve_attacked and r.eve_guess is not None:
            ev += ["attacked_code", f"eve:{r.op_bit}{r.eve_guess}"]
            if r.eve_guess == r.op_bit:
                ev.append("eve_correct")
            if r.eve_informed:
                ev.append("eve_informed")
    return tuple(ev)


def tally(records: Iterable[RoundRecord]) -> Counter:
    counts: Counter = Counter()
    for r in records:
        counts.update(round_events(r))
    return counts


def ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class QberReport:
    qber_check: Optional[float]
    qber_key: Optional[float]
    n_check_compared: int
    n_check_errors: int
    n_key_sampled: int
    n_key_errors: int
    sifted_key_length: int
    usable_key_length: int
    detection_rate: float
    loss_rate: Optional[float]


def sample_size(n: int, sample_fraction: float) -> int:
    return min(n, math.ceil(sample_fraction * n - 1e-9))


def estimate_qber(records: Sequence[RoundRecord], sample_fraction: float, rng: random.Random) -> QberReport:
    """Error rates over basis-matched check samples and a disclosed key subset.

    The disclosed key positions are drawn uniformly without replacement and
    no longer count toward the usable key. `qber_check` is None when no check
    sample shares Bob's basis.
    """
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample_fraction must be in (0, 1]")
    alice, bob, samples = sift(records)
    n_check_err = sum(s.expected != s.observed for s in samples)
    k = sample_size(len(alice), sample_fraction)
    positions = sorted(rng.sample(range(len(alice)), k))
    n_key_err = sum(alice[i] != bob[i] for i in positions)
    n_code = sum(r.mode == "code" for r in records)
    n_lost = sum(r.mode == "code" and r.bob_outcome is None for r in records)
    return QberReport(
        qber_check=ratio(n_check_err, len(samples)),
        qber_key=ratio(n_key_err, k),
        n_check_compared=len(samples),
        n_check_errors=n_check_err,
        n_key_sampled=k,
        n_key_errors=n_key_err,
        sifted_key_length=len(alice),
        usable_key_length=len(alice) - k,
        detection_rate=ratio(sum(r.detected for r in records), len(records)) or 0.0,
        loss_rate=ratio(n_lost, n_code),
    )
