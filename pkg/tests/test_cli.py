"""Command-line behavior: configs, exit codes, artifacts."""

import json
from pathlib import Path

import pytest

from swiptbeam.cli import ConfigError, load_config, main


def test_defaults_without_config(monkeypatch):
    monkeypatch.delenv("SWIPTBEAM_CONFIG", raising=False)
    config = load_config(None)
    assert config["system"]["n_tx"] == 6
    assert config["system"]["p_max_dbm"] == 36.0
    assert config["geometry"]["carrier_hz"] == 915e6


def test_toml_config_overrides(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text("[system]\nn_tx = 4\nn_er = 2\n")
    config = load_config(str(path))
    assert config["system"]["n_tx"] == 4
    assert config["system"]["n_er"] == 2
    assert config["system"]["n_rx"] == 2  # untouched default


def test_json_config_overrides(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"errors": {"ir_norm_var": 0.005}}))
    config = load_config(str(path))
    assert config["errors"]["ir_norm_var"] == 0.005


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[system]\nantennas = 4\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_env_var_supplies_config(tmp_path, monkeypatch):
    path = tmp_path / "env.toml"
    path.write_text("[system]\nn_tx = 5\n")
    monkeypatch.setenv("SWIPTBEAM_CONFIG", str(path))
    config = load_config(None)
    assert config["system"]["n_tx"] == 5


def small_config(tmp_path, **system_overrides):
    system = {"n_tx": 4, "n_er": 2, "sinr_db": 6.0}
    system.update(system_overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"system": system}))
    return str(path)


class TestSolveCommand:
    def test_default_solve_exits_zero_with_rank_one(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        json_out = tmp_path / "result.json"
        code = main(
            ["solve", "--config", cfg, "--seed", "3", "--json-out", str(json_out)]
        )
        assert code == 0
        payload = json.loads(json_out.read_text())
        assert payload["status"] == "solved"
        for ratio in payload["rank_report"]["w_ratios"]:
            assert ratio <= 1e-6
        out = capsys.readouterr().out
        assert "min harvested power" in out
        assert "dBm" in out

    def test_builtin_defaults_solve(self, tmp_path, monkeypatch):
        # no config at all: the built-in scenario solves with rank-one beams
        monkeypatch.delenv("SWIPTBEAM_CONFIG", raising=False)
        json_out = tmp_path / "default.json"
        code = main(["solve", "--seed", "1", "--json-out", str(json_out)])
        assert code == 0
        payload = json.loads(json_out.read_text())
        for ratio in payload["rank_report"]["w_ratios"]:
            assert ratio <= 1e-6

    def test_zero_power_exits_two(self, tmp_path):
        cfg = small_config(tmp_path, p_max_w=0.0)
        assert main(["solve", "--config", cfg, "--seed", "0"]) == 2

    def test_malformed_config_exits_one(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[system\nn_tx = ")
        assert main(["solve", "--config", str(path)]) == 1

    def test_unknown_key_exits_one(self, tmp_path):
        path = tmp_path / "odd.json"
        path.write_text(json.dumps({"mystery": 1}))
        assert main(["solve", "--config", str(path)]) == 1

    def test_kkt_flag_prints_certificate(self, tmp_path, capsys):
        cfg = small_config(tmp_path)
        code = main(["solve", "--config", cfg, "--seed", "3", "--kkt"])
        assert code == 0
        assert "kkt certificate" in capsys.readouterr().out

    def test_dump_problem_writes_file(self, tmp_path):
        cfg = small_config(tmp_path)
        dump = tmp_path / "problem.txt"
        code = main(["solve", "--config", cfg, "--seed", "3", "--dump-problem", str(dump)])
        assert code == 0
        text = dump.read_text()
        assert "power_budget" in text and "c5_0" in text


class TestSweepCommand:
    def test_sweep_writes_both_csvs(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "out"
        code = main(
            [
                "sweep", "--config", cfg, "--axis", "rate", "--values", "1,2",
                "--realizations", "2", "--schemes", "proposed", "--out", str(out),
                "--seed", "9",
            ]
        )
        assert code == 0
        records = (out / "records.csv").read_text()
        assert records.count("\n") == 1 + 2 * 2  # header + values x realizations
        assert (out / "aggregate.csv").exists()

    def test_sweep_idempotent_bytes(self, tmp_path):
        cfg = small_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        args = [
            "sweep", "--config", cfg, "--axis", "rate", "--values", "1,2",
            "--realizations", "1", "--schemes", "proposed", "--seed", "4",
        ]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0

        def strip_times(text):
            return "\n".join(ln.rsplit(",", 1)[0] for ln in text.splitlines())

        assert strip_times((out1 / "records.csv").read_text()) == strip_times(
            (out2 / "records.csv").read_text()
        )
        assert (out1 / "aggregate.csv").read_bytes() == (out2 / "aggregate.csv").read_bytes()

    def test_record_count_with_multiple_schemes(self, tmp_path):
        cfg = small_config(tmp_path)
        out = tmp_path / "multi"
        code = main(
            [
                "sweep", "--config", cfg, "--axis", "n_er", "--values", "1,2",
                "--realizations", "2", "--schemes", "proposed,baseline2",
                "--out", str(out), "--seed", "2",
            ]
        )
        assert code == 0
        lines = (out / "records.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 2 * 2
