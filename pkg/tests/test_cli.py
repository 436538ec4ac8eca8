import json
import subprocess
import sys

import pytest

from twoway_qkd.adversary import DelayPhoton, NoEve
from twoway_qkd.cli import PRESETS, ScenarioPreset, main, parse_invocation, render_report
from twoway_qkd.engine import ConfigError, SimConfig, run_simulation


class TestParseInvocation:
    def test_preset_expansion(self):
        cfg, _ = parse_invocation(["--preset", "delay-photon-both", "--rounds", "100000", "--seed", "7"])
        assert isinstance(cfg.eve, DelayPhoton)
        assert cfg.filter_on and cfg.splitter_on
        assert (cfg.rounds, cfg.master_seed) == (100_000, 7)

    def test_range_error_names_field(self):
        with pytest.raises(ConfigError) as info:
            parse_invocation(["--check-fraction", "1.5"])
        assert info.value.field == "check-fraction"

    def test_defaults(self):
        cfg, opts = parse_invocation([])
        assert cfg == SimConfig()
        assert isinstance(cfg.eve, NoEve) and cfg.defense == "none"
        assert opts.output == "json" and not opts.exact

    def test_contradictory_attack(self):
        with pytest.raises(ConfigError) as info:
            parse_invocation(["--preset", "delay-photon-both", "--attack", "intercept-resend"])
        assert info.value.field == "attack"

    def test_contradictory_defense(self):
        with pytest.raises(ConfigError):
            parse_invocation(["--preset", "delay-photon-both", "--defense", "none"])

    def test_bare_attack_preset_takes_defense_flag(self):
        cfg, _ = parse_invocation(["--preset", "invisible-photon", "--defense", "filter"])
        assert cfg.filter_on and not cfg.splitter_on

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as info:
            parse_invocation(["--preset", "laser-damage"])
        assert info.value.field == "preset"

    def test_precedence(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"attack": "bright-pulse", "rounds": 50, "pulse_m": 2, "check_fraction": 0.3}))
        cfg, _ = parse_invocation(["--preset", "delay-photon-splitter", "--config", str(path), "--pulse-m", "4"])
        # file overrides preset, flag overrides file
        assert cfg.eve.name == "bright-pulse" and cfg.eve.m == 4
        assert cfg.splitter_on and cfg.rounds == 50 and cfg.check_fraction == 0.3

    def test_round_trip_through_config_echo(self, tmp_path):
        cfg, _ = parse_invocation(["--preset", "bright-pulse-both", "--rounds", "300", "--seed", "0x1f", "--pulse-m", "2"])
        report = run_simulation(cfg)
        path = tmp_path / "echo.json"
        path.write_text(json.dumps(report.config))
        again, _ = parse_invocation(["--config", str(path)])
        assert again == cfg

    def test_every_preset_expands(self):
        assert len(PRESETS) == 20
        for p in PRESETS:
            cfg = p.config()
            cfg.validate()
            assert ScenarioPreset.parse(p.name) == p
            assert cfg.eve.name == p.attack and cfg.defense == p.defense


class TestEmit:
    def test_honest_json(self, tmp_path, capsys):
        assert main(["--rounds", "2000"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["qber_check"] == 0.0
        assert list(data)[:8] == [
            "qber_check",
            "qber_key",
            "detection_rate",
            "loss_rate",
            "eve_information_bits",
            "sifted_key_length",
            "usable_key_length",
            "p_undetected",
        ]
        assert data["exact"] is None and data["config"]["attack"] == "honest"

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["--preset", "intercept-resend", "--rounds", "3000", "--seed", "5", "--exact"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b), "--workers", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()
        exact = json.loads(a.read_text())["exact"]
        assert exact["check_error_given_matched"] == 0.25

    def test_csv_two_lines(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["--rounds", "500", "--output", "csv", "--out", str(out), "--exact"]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        header = lines[0].split(",")
        assert header[0] == "qber_check" and "config.seed" in header
        assert not any(h.startswith("exact") for h in header)

    def test_full_precision_floats(self):
        r = run_simulation(SimConfig(rounds=999, eve=DelayPhoton(), splitter_on=True))
        data = json.loads(render_report(r))
        assert data["detection_rate"] == r.detection_rate

    def test_unwritable_path(self, tmp_path):
        assert main(["--rounds", "10", "--out", str(tmp_path / "missing" / "r.json")]) == 3

    def test_config_error_exit(self, capsys):
        assert main(["--check-fraction", "1.5"]) == 2
        assert "check-fraction" in capsys.readouterr().err

    def test_unknown_flag_exit(self):
        proc = subprocess.run(
            [sys.executable, "-m", "twoway_qkd", "--frobnicate"], capture_output=True, text=True
        )
        assert proc.returncode == 2 and "--frobnicate" in proc.stderr

    def test_bad_config_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["--config", str(path)]) == 2
