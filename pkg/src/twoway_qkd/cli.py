"""Command-line batch runner.

Settings are resolved in three layers, later ones winning:
preset (``--preset``) < config file (``--config``, flat JSON as echoed in a
report's ``config`` block) < individual flags.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from .adversary import STRATEGIES
from .engine import ConfigError, Report, SimConfig, run_simulation

DEFENSES = ("none", "filter", "splitter", "both")
ATTACKS = tuple(STRATEGIES)
EXIT_CONFIG = 2
EXIT_IO = 3


@dataclass(frozen=True)
class ScenarioPreset:
    attack: str
    defense: str = "none"

    @property
    def name(self) -> str:
        return f"{self.attack}-{self.defense}"

    @classmethod
    def parse(cls, name: str) -> ScenarioPreset:
        """Accept ``ATTACK`` or ``ATTACK-DEFENSE``, e.g. ``delay-photon-both``."""
        if name in ATTACKS:
            return cls(name)
        for d in DEFENSES:
            attack = name[: -len(d) - 1]
            if name.endswith("-" + d) and attack in ATTACKS:
                return cls(attack, d)
        raise ConfigError("preset", f"unknown preset {name!r}")

    def settings(self) -> dict[str, Any]:
        return {
            "attack": self.attack,
            "filter_on": self.defense in ("filter", "both"),
            "splitter_on": self.defense in ("splitter", "both"),
        }

    def config(self, **overrides: Any) -> SimConfig:
        return SimConfig.from_flat({**self.settings(), **overrides})


PRESETS = tuple(ScenarioPreset(a, d) for a in ATTACKS for d in DEFENSES)


@dataclass(frozen=True)
class RunOptions:
    output: str = "json"
    out: Optional[str] = None
    exact: bool = False
    workers: int = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # keep argparse's usage line, pin the exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twoway-qkd", description="Monte Carlo simulation of two-way QKD under Trojan horse attacks.")
    p.add_argument("--preset", help="ATTACK[-DEFENSE], e.g. delay-photon-both (default: honest)")
    p.add_argument("--config", metavar="PATH", help="flat JSON config file")
    p.add_argument("--attack", choices=ATTACKS)
    p.add_argument("--defense", choices=DEFENSES)
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.add_argument("--check-fraction", type=float)
    p.add_argument("--sample-fraction", type=float)
    p.add_argument("--attack-rate", type=float)
    p.add_argument("--probe-state", choices=("+z", "-z", "+x", "-x"))
    p.add_argument("--probe-delay-ns", type=float)
    p.add_argument("--pulse-m", type=int)
    p.add_argument("--output", choices=("json", "csv"), default="json")
    p.add_argument("--exact", action="store_true", help="embed exact single-round probabilities")
    p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--workers", type=int, default=1, help="worker processes (output is identical for any value)")
    return p


_FLAG_KEYS = {
    "rounds": "rounds",
    "seed": "seed",
    "check_fraction": "check_fraction",
    "sample_fraction": "sample_fraction",
    "attack_rate": "attack_rate",
    "probe_state": "probe_state",
    "probe_delay_ns": "probe_delay_ns",
    "pulse_m": "pulse_m",
}


def _read_config_file(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "file must hold a JSON object")
    return data


def parse_invocation(argv: Sequence[str], config_file: Optional[str] = None) -> tuple[SimConfig, RunOptions]:
    """Resolve argv (and an optional config file) into a validated SimConfig."""
    args = build_parser().parse_args(list(argv))
    flat: dict[str, Any] = {}
    preset = None
    if args.preset is not None:
        preset = ScenarioPreset.parse(args.preset)
        flat.update(preset.settings())
    path = args.config or config_file
    if path is not None:
        flat.update(_read_config_file(path))
    if args.attack is not None:
        if preset is not None and args.attack != preset.attack:
            raise ConfigError("attack", f"--attack {args.attack} contradicts --preset {args.preset}")
        flat["attack"] = args.attack
    if args.defense is not None:
        # a bare-attack preset leaves the defense open
        if preset is not None and args.preset != preset.attack and args.defense != preset.defense:
            raise ConfigError("defense", f"--defense {args.defense} contradicts --preset {args.preset}")
        flat["filter_on"] = args.defense in ("filter", "both")
        flat["splitter_on"] = args.defense in ("splitter", "both")
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest)
        if value is not None:
            flat[key] = value
    if args.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    cfg = SimConfig.from_flat(flat)
    return cfg, RunOptions(args.output, args.out, args.exact, args.workers)


def _csv_cells(d: dict[str, Any], prefix: str = "") -> list[tuple[str, Any]]:
    cells = []
    for k, v in d.items():
        if isinstance(v, dict):
            cells += _csv_cells(v, f"{prefix}{k}.")
        else:
            cells.append((prefix + k, v))
    return cells


def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def render_report(r: Report, fmt: str = "json") -> str:
    data = r.to_dict()
    if fmt == "json":
        return json.dumps(data, indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        data.pop("exact")
        data.pop("counts")
        cells = _csv_cells(data)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([k for k, _ in cells])
        w.writerow([_csv_value(v) for _, v in cells])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def emit_report(r: Report, fmt: str = "json", out: Optional[str] = None) -> None:
    text = render_report(r, fmt)
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg, opts = parse_invocation(argv)
    except ConfigError as exc:
        print(f"twoway-qkd: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_simulation(cfg, workers=opts.workers, with_exact=opts.exact)
    try:
        emit_report(report, opts.output, opts.out)
    except OSError as exc:
        print(f"twoway-qkd: error: cannot write {opts.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
