"""Seeded Monte Carlo driver, mergeable statistics and the exact branch
enumeration oracle."""

from __future__ import annotations

import math
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from functools import reduce
from typing import Any, Mapping, Optional, Sequence

from .adversary import STRATEGIES, EveStrategy, NoEve, mutual_information
from .chance import BranchSpaceTooLarge, RandomChooser, derive_round_seed, enumerate_branches, sampling_seed
from .photonics import DetectorSpec, FilterSpec
from .protocol import LABELS, ProtocolConfig, RoundRecord, estimate_qber, play_round, ratio, round_events, tally
from .qstate import StateLabel

MASK64 = (1 << 64) - 1
LOW_CONFIDENCE_ROUNDS = 100
MAX_LEAVES = 10**6


class ConfigError(ValueError):
    """Invalid simulation setting; `field` names the offending key."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class SimConfig:
    rounds: int = 100_000
    master_seed: int = 0
    check_fraction: float = 0.5
    sample_fraction: float = 0.1
    eve: EveStrategy = field(default_factory=NoEve)
    filter_on: bool = False
    splitter_on: bool = False
    filter: FilterSpec = FilterSpec()
    detector: DetectorSpec = DetectorSpec()

    def validate(self) -> None:
        if not isinstance(self.rounds, int) or self.rounds < 1:
            raise ConfigError("rounds", "must be an integer >= 1")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed <= MASK64:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")
        if not 0.0 <= self.check_fraction <= 1.0:
            raise ConfigError("check-fraction", "must be in [0, 1]")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("sample-fraction", "must be in (0, 1]")

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(self.check_fraction, self.filter_on, self.splitter_on, self.filter, self.detector)

    @property
    def defense(self) -> str:
        if self.filter_on and self.splitter_on:
            return "both"
        return "filter" if self.filter_on else "splitter" if self.splitter_on else "none"

    def to_flat(self) -> dict[str, Any]:
        """Flat key/value echo, also the config-file format."""
        eve = self.eve
        return {
            "rounds": self.rounds,
            "seed": self.master_seed,
            "check_fraction": self.check_fraction,
            "sample_fraction": self.sample_fraction,
            "attack": eve.name,
            "attack_rate": eve.attack_rate,
            "probe_state": getattr(eve, "probe_state", StateLabel.PLUS_Z).value,
            "probe_delay_ns": getattr(eve, "probe_delay_ns", 5.0),
            "pulse_m": getattr(eve, "m", 3),
            "probe_wavelength_nm": getattr(eve, "probe_wavelength_nm", 1310.0),
            "filter_on": self.filter_on,
            "splitter_on": self.splitter_on,
            "filter_pass_min_nm": self.filter.pass_min_nm,
            "filter_pass_max_nm": self.filter.pass_max_nm,
            "filter_transmission": self.filter.in_band_transmission,
            "detector_time_window_ns": self.detector.time_window_ns,
            "detector_dead_time_ns": self.detector.dead_time_ns,
            "detector_efficiency": self.detector.efficiency,
            "detector_response_min_nm": self.detector.response_min_nm,
            "detector_response_max_nm": self.detector.response_max_nm,
        }

    @classmethod
    def from_flat(cls, flat: Mapping[str, Any]) -> SimConfig:
        base = SimConfig().to_flat()
        unknown = sorted(set(flat) - set(base))
        if unknown:
            raise ConfigError(unknown[0], "unknown setting")
        v = {**base, **{k: _typed(k, flat[k], base[k]) for k in flat}}
        eve = make_strategy(
            v["attack"],
            attack_rate=v["attack_rate"],
            probe_state=v["probe_state"],
            probe_delay_ns=v["probe_delay_ns"],
            pulse_m=v["pulse_m"],
            probe_wavelength_nm=v["probe_wavelength_nm"],
        )
        try:
            filt = FilterSpec(v["filter_pass_min_nm"], v["filter_pass_max_nm"], v["filter_transmission"])
        except ValueError as exc:
            raise ConfigError("filter", str(exc)) from None
        try:
            det = DetectorSpec(
                v["detector_time_window_ns"],
                v["detector_dead_time_ns"],
                v["detector_efficiency"],
                v["detector_response_min_nm"],
                v["detector_response_max_nm"],
            )
        except ValueError as exc:
            raise ConfigError("detector", str(exc)) from None
        cfg = cls(
            rounds=v["rounds"],
            master_seed=v["seed"],
            check_fraction=v["check_fraction"],
            sample_fraction=v["sample_fraction"],
            eve=eve,
            filter_on=bool(v["filter_on"]),
            splitter_on=bool(v["splitter_on"]),
            filter=filt,
            detector=det,
        )
        cfg.validate()
        return cfg


def _typed(key: str, value: Any, default: Any) -> Any:
    kind = type(default)
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(key.replace("_", "-"), f"expected {kind.__name__}, got {value!r}")
    return value


def make_strategy(
    attack: str,
    *,
    attack_rate: float = 1.0,
    probe_state: str | StateLabel = StateLabel.PLUS_Z,
    probe_delay_ns: float = 5.0,
    pulse_m: int = 3,
    probe_wavelength_nm: float = 1310.0,
) -> EveStrategy:
    """Build a strategy by attack name, keeping only the parameters it uses."""
    if attack not in STRATEGIES:
        raise ConfigError("attack", f"unknown attack {attack!r}; expected one of {', '.join(STRATEGIES)}")
    if not 0.0 <= attack_rate <= 1.0:
        raise ConfigError("attack-rate", "must be in [0, 1]")
    try:
        state = probe_state if isinstance(probe_state, StateLabel) else StateLabel(probe_state)
    except ValueError:
        raise ConfigError("probe-state", f"expected one of +z, -z, +x, -x, got {probe_state!r}") from None
    if not (math.isfinite(probe_delay_ns) and probe_delay_ns >= 0):
        raise ConfigError("probe-delay-ns", "must be finite and >= 0")
    if not isinstance(pulse_m, int) or pulse_m < 1:
        raise ConfigError("pulse-m", "must be an integer >= 1")
    if not probe_wavelength_nm > 0:
        raise ConfigError("probe-wavelength-nm", "must be > 0")
    cls = STRATEGIES[attack]
    kwargs: dict[str, Any] = {"attack_rate": attack_rate}
    names = {f.name for f in fields(cls)}
    if "probe_state" in names:
        kwargs["probe_state"] = state
    if "probe_delay_ns" in names:
        kwargs["probe_delay_ns"] = probe_delay_ns
    if "m" in names:
        kwargs["m"] = pulse_m
    if "probe_wavelength_nm" in names:
        kwargs["probe_wavelength_nm"] = probe_wavelength_nm
    return cls(**kwargs)


# --- statistics -----------------------------------------------------------


@dataclass(frozen=True)
class RoundStats:
    """Raw event counts over a set of disjoint half-open round ranges."""

    ranges: tuple[tuple[int, int], ...] = ()
    counts: Counter = field(default_factory=Counter)

    @classmethod
    def of(cls, start: int, records: Sequence[RoundRecord]) -> RoundStats:
        if not records:
            return cls()
        return cls(((start, start + len(records)),), tally(records))


def _union(a: Sequence[tuple[int, int]], b: Sequence[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    spans = sorted([*a, *b])
    out: list[tuple[int, int]] = []
    for lo, hi in spans:
        if out and lo < out[-1][1]:
            raise ValueError(f"overlapping round ranges: {out[-1]} and {(lo, hi)}")
        if out and lo == out[-1][1]:
            out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def merge_stats(a: RoundStats, b: RoundStats) -> RoundStats:
    """Combine statistics of disjoint round ranges; commutative and associative."""
    return RoundStats(_union(a.ranges, b.ranges), a.counts + b.counts)


# --- simulation -----------------------------------------------------------


def _run_shard(cfg: SimConfig, start: int, stop: int) -> list[RoundRecord]:
    proto, eve, seed = cfg.protocol(), cfg.eve, cfg.master_seed
    chooser = RandomChooser(0)
    return [play_round(proto, eve, chooser.reseed(derive_round_seed(seed, i)), i) for i in range(start, stop)]


def shard_bounds(rounds: int, shards: int) -> list[tuple[int, int]]:
    shards = max(1, min(shards, rounds))
    step = rounds // shards
    extra = rounds % shards
    out, lo = [], 0
    for s in range(shards):
        hi = lo + step + (1 if s < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def simulate_rounds(cfg: SimConfig, workers: int = 1, shards: Optional[int] = None) -> tuple[list[RoundRecord], RoundStats]:
    """Run every round, returning the ordered transcript and merged stats.

    Output does not depend on `workers` or `shards`: every round draws from
    its own derived seed and shard results are merged in index order.
    """
    cfg.validate()
    bounds = shard_bounds(cfg.rounds, shards or workers)
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_shard, [cfg] * len(bounds), *zip(*bounds)))
    else:
        parts = [_run_shard(cfg, lo, hi) for lo, hi in bounds]
    stats = reduce(merge_stats, (RoundStats.of(lo, part) for (lo, _), part in zip(bounds, parts)), RoundStats())
    records = [r for part in parts for r in part]
    return records, stats


@dataclass(frozen=True)
class Report:
    qber_check: Optional[float]
    qber_key: Optional[float]
    detection_rate: float
    loss_rate: Optional[float]
    eve_information_bits: Optional[float]
    sifted_key_length: int
    usable_key_length: int
    p_undetected: float
    n_rounds: int
    n_check_rounds: int
    n_code_rounds: int
    n_check_compared: int
    n_check_errors: int
    n_key_sampled: int
    n_key_errors: int
    multiphoton_rate_check: Optional[float]
    multiphoton_rate_check_by_prep: dict[str, Optional[float]]
    eve_guess_accuracy: Optional[float]
    eve_attacked_coding_rounds: int
    eve_information_low_confidence: bool
    strategy: dict[str, Any]
    counts: dict[str, int]
    config: dict[str, Any]
    exact: Optional[dict[str, Any]] = None

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def build_report(cfg: SimConfig, records: Sequence[RoundRecord], stats: RoundStats, exact: Optional[dict] = None) -> Report:
    c = stats.counts
    q = estimate_qber(records, cfg.sample_fraction, random.Random(sampling_seed(cfg.master_seed)))
    joint = {(a, e): c[f"eve:{a}{e}"] for a in (0, 1) for e in (0, 1)}
    attacked_code = c["attacked_code"]
    return Report(
        qber_check=q.qber_check,
        qber_key=q.qber_key,
        detection_rate=c["detected"] / c["round"],
        loss_rate=ratio(c["lost"], c["code"]),
        eve_information_bits=mutual_information(joint) if attacked_code else None,
        sifted_key_length=q.sifted_key_length,
        usable_key_length=q.usable_key_length,
        p_undetected=1.0 if c["detected"] == 0 else 0.0,
        n_rounds=c["round"],
        n_check_rounds=c["check"],
        n_code_rounds=c["code"],
        n_check_compared=q.n_check_compared,
        n_check_errors=q.n_check_errors,
        n_key_sampled=q.n_key_sampled,
        n_key_errors=q.n_key_errors,
        multiphoton_rate_check=ratio(c["flag"], c["check"]),
        multiphoton_rate_check_by_prep={
            s.value: ratio(c[f"flag@{s.value}"], c[f"check@{s.value}"]) for s in LABELS
        },
        eve_guess_accuracy=ratio(c["eve_correct"], attacked_code),
        eve_attacked_coding_rounds=attacked_code,
        eve_information_low_confidence=attacked_code < LOW_CONFIDENCE_ROUNDS,
        strategy={"name": cfg.eve.name, **cfg.eve.params()},
        counts=dict(sorted(c.items())),
        config=cfg.to_flat(),
        exact=exact,
    )


def run_simulation(cfg: SimConfig, workers: int = 1, shards: Optional[int] = None, with_exact: bool = False) -> Report:
    records, stats = simulate_rounds(cfg, workers, shards)
    exact = exact_enumerate(ExactScenario.of(cfg)).summary() if with_exact else None
    return build_report(cfg, records, stats, exact)


def eve_information(records: Sequence[RoundRecord]) -> tuple[Optional[float], bool]:
    """Eve's information per attacked coding round, and a low-confidence flag."""
    c = tally(records)
    joint = {(a, e): c[f"eve:{a}{e}"] for a in (0, 1) for e in (0, 1)}
    if not c["attacked_code"]:
        return None, True
    return mutual_information(joint), c["attacked_code"] < LOW_CONFIDENCE_ROUNDS


# --- exact oracle ---------------------------------------------------------


@dataclass(frozen=True)
class ExactScenario:
    protocol: ProtocolConfig = ProtocolConfig()
    eve: EveStrategy = field(default_factory=NoEve)
    max_leaves: int = MAX_LEAVES

    @classmethod
    def of(cls, cfg: SimConfig) -> ExactScenario:
        return cls(cfg.protocol(), cfg.eve)


# (event, conditioning event) pairs the oracle and the Monte Carlo both report
ORACLE_RATES: tuple[tuple[str, str], ...] = (
    ("check", "round"),
    ("detected", "round"),
    ("attacked", "round"),
    ("flag", "check"),
    ("check_matched", "check"),
    ("check_error", "check_matched"),
    ("attacked_check_detected", "attacked_check"),
    ("key", "code"),
    ("lost", "code"),
    ("key_error", "key"),
    ("eve_correct", "attacked_code"),
    ("eve_informed", "attacked_code"),
) + tuple((f"flag@{s.value}", f"check@{s.value}") for s in LABELS)


@dataclass(frozen=True)
class ExactResult:
    probabilities: dict[str, float]
    leaves: int
    total: float

    def p(self, event: str) -> float:
        return self.probabilities.get(event, 0.0)

    def given(self, event: str, condition: str) -> Optional[float]:
        den = self.p(condition)
        if den == 0.0:
            return None
        return min(1.0, self.p(event) / den)

    def summary(self) -> dict[str, Any]:
        joint = {(a, e): self.p(f"eve:{a}{e}") for a in (0, 1) for e in (0, 1)}
        return {
            "leaves": self.leaves,
            "check_error_given_matched": self.given("check_error", "check_matched"),
            "key_error_given_key": self.given("key_error", "key"),
            "flag_given_check": self.given("flag", "check"),
            "flag_given_check_by_prep": {
                s.value: self.given(f"flag@{s.value}", f"check@{s.value}") for s in LABELS
            },
            "detection_rate": self.p("detected"),
            "loss_given_code": self.given("lost", "code"),
            "eve_correct_given_attacked_code": self.given("eve_correct", "attacked_code"),
            "eve_information_bits": mutual_information(joint) if self.p("attacked_code") else None,
            "rates": {f"{e}|{cnd}": self.given(e, cnd) for e, cnd in ORACLE_RATES},
        }


def exact_enumerate(sc: ExactScenario) -> ExactResult:
    """Walk every branch of one round, weighting events by branch probability.

    The round is played by the same `play_round` used for Monte Carlo, with a
    scripted chooser instead of a seeded one. Zero-probability options are
    never visited. Raises BranchSpaceTooLarge past `sc.max_leaves` leaves.
    """
    probs: dict[str, float] = {}
    leaves = 0
    total = 0.0
    branches = enumerate_branches(lambda ch: play_round(sc.protocol, sc.eve, ch), sc.max_leaves)
    for record, w in branches:
        leaves += 1
        total += w
        for ev in round_events(record):
            probs[ev] = probs.get(ev, 0.0) + w
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"branch probabilities sum to {total!r}")
    return ExactResult(probs, leaves, total)


@dataclass(frozen=True)
class Agreement:
    rate: str
    monte_carlo: Optional[float]
    exact: Optional[float]
    n: int
    sigma: float
    ok: bool


def compare_with_oracle(counts: Mapping[str, int], exact: ExactResult, k_sigma: float = 3.0) -> list[Agreement]:
    """Check Monte Carlo conditional rates against exact probabilities.

    A rate passes when |mc - p| <= k_sigma * sqrt(p(1-p)/n), n being the number
    of rounds in the conditioning event; p in {0, 1} therefore demands an exact
    match. Rates whose condition never occurs on either side are skipped.
    """
    out = []
    for event, cond in ORACLE_RATES:
        n = counts.get(cond, 0)
        p = exact.given(event, cond)
        if n == 0 and p is None:
            continue
        if n == 0 or p is None:
            out.append(Agreement(f"{event}|{cond}", ratio(counts.get(event, 0), n), p, n, 0.0, False))
            continue
        mc = counts.get(event, 0) / n
        sigma = math.sqrt(p * (1.0 - p) / n)
        ok = abs(mc - p) <= k_sigma * sigma + 1e-12
        out.append(Agreement(f"{event}|{cond}", mc, p, n, sigma, ok))
    return out
