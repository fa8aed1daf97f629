import json
import math

import pytest

from qdrepeater.runner import (
    OUTPUT_DIR_ENV,
    RunConfig,
    UsageError,
    execute,
    main,
    parse_config,
    render,
)


def run_to_file(tmp_path, args, name="out.json"):
    path = tmp_path / name
    config = parse_config(args + ["--output-path", str(path)])
    record = execute(config)
    return record, path


class TestParseConfig:
    def test_defaults(self):
        config = parse_config(["swap"])
        assert config.theta == pytest.approx(math.pi / 4)
        assert config.delta_over_g == 20.0
        assert config.g_over_omega == 0.01
        assert config.n_max == 8
        assert config.seed == 0
        assert config.trials == 1000
        assert config.retry_policy == "discard-both"
        assert config.output_format == "json"
        assert config.ratios == (5.0, 10.0, 20.0, 40.0, 80.0)

    def test_cli_override(self):
        config = parse_config(["swap", "--theta", "0.7853981633974483"])
        assert config.theta == 0.7853981633974483

    def test_config_file_and_cli_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("theta = 0.5\nseed = 11\n# comment\ntrials = 77\n")
        config = parse_config(["swap", "--config", str(cfg), "--seed", "3"])
        assert config.theta == 0.5      # file beats default
        assert config.seed == 3         # CLI beats file
        assert config.trials == 77

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("volume = 11\n")
        with pytest.raises(UsageError, match="volume"):
            parse_config(["swap", "--config", str(cfg)])

    def test_malformed_config_line_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("theta 0.5\n")
        with pytest.raises(UsageError, match="key = value"):
            parse_config(["swap", "--config", str(cfg)])

    def test_invalid_values_name_the_key(self):
        with pytest.raises(UsageError, match="n_max"):
            parse_config(["swap", "--n-max", "0"])
        with pytest.raises(UsageError, match="trials"):
            parse_config(["swap", "--trials", "0"])
        with pytest.raises(UsageError, match="theta"):
            parse_config(["swap", "--theta", "nan"])
        with pytest.raises(UsageError, match="retry_policy"):
            parse_config(["chain", "--retry-policy", "sometimes"])

    def test_closure_depth_minimum(self):
        with pytest.raises(UsageError, match="closure"):
            parse_config(["closure", "--depth", "1"])
        assert parse_config(["closure"]).depth == 2
        assert parse_config(["chain"]).depth == 1

    def test_unknown_command_rejected(self):
        with pytest.raises(UsageError):
            parse_config(["dance"])

    def test_ratios_parsing(self):
        config = parse_config(["sweep", "--ratios", "5, 10,40"])
        assert config.ratios == (5.0, 10.0, 40.0)


class TestExecute:
    def test_swap_enumerate_payload(self, tmp_path):
        record, path = run_to_file(tmp_path, ["swap", "--enumerate"])
        payload = json.loads(path.read_text())
        assert set(payload) == {"config", "version", "timestamp", "results", "wall_time_ms"}
        rows = payload["results"]["rows"]
        assert [r["outcome"] for r in rows] == ["gg", "ge", "eg", "ee"]
        for row in rows:
            assert row["probability"] == pytest.approx(0.25, abs=1e-12)
            assert len(row["post_state_amplitudes"]) == 4
        assert payload["results"]["summary"]["success_probability"] == pytest.approx(0.5, abs=1e-12)
        tags = {r["outcome"]: r["tag"] for r in rows}
        assert tags == {"gg": "other", "ge": "psi_prime", "eg": "psi", "ee": "other"}

    def test_config_echo_contains_every_field(self, tmp_path):
        record, path = run_to_file(tmp_path, ["swap", "--enumerate"])
        payload = json.loads(path.read_text())
        from dataclasses import fields

        assert set(payload["config"]) == {f.name for f in fields(RunConfig)}

    def test_chain_results_reproducible(self, tmp_path):
        args = ["chain", "--depth", "3", "--trials", "60", "--seed", "7"]
        r1, _ = run_to_file(tmp_path, args, "a.json")
        r2, _ = run_to_file(tmp_path, args, "b.json")
        assert json.dumps(r1.results) == json.dumps(r2.results)

    def test_swap_sample_reproducible(self, tmp_path):
        args = ["swap", "--trials", "500", "--seed", "9"]
        r1, _ = run_to_file(tmp_path, args, "a.json")
        r2, _ = run_to_file(tmp_path, args, "b.json")
        assert json.dumps(r1.results) == json.dumps(r2.results)

    def test_csv_and_json_numeric_values_agree(self, tmp_path):
        args = ["sweep", "--ratios", "10,20"]
        record, jpath = run_to_file(tmp_path, args, "run.json")
        csv_text = render(record, "csv")
        lines = csv_text.strip().splitlines()
        header = lines[0].split(",")
        for line, row in zip(lines[1:], record.results["rows"]):
            for key, cell in zip(header, line.split(",")):
                value = row[key]
                if isinstance(value, float):
                    assert cell == format(value, ".15g")
                    assert float(cell) == pytest.approx(value, rel=1e-14)
                else:
                    assert cell == str(value)

    def test_csv_branch_rows(self, tmp_path):
        path = tmp_path / "swap.csv"
        config = parse_config(
            ["swap", "--enumerate", "--output-format", "csv", "--output-path", str(path)]
        )
        execute(config)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("outcome,probability,success,tag,amp_ee_re,amp_ee_im")
        assert len(lines) == 5  # header + four branches

    def test_closure_table_payload(self, tmp_path):
        record, path = run_to_file(tmp_path, ["closure", "--depth", "4"])
        payload = json.loads(path.read_text())
        assert payload["results"]["summary"]["ok"] is True
        success_tags = {
            row["output_tag"]
            for row in payload["results"]["rows"]
            if row["success"]
        }
        assert success_tags == {"psi", "psi_prime"}

    @pytest.mark.filterwarnings("ignore:parameters not dispersive")
    def test_validate_battery_passes(self, tmp_path):
        record, path = run_to_file(tmp_path, ["validate"])
        payload = json.loads(path.read_text())
        assert payload["results"]["summary"]["ok"] is True
        checks = {row["check"]: row for row in payload["results"]["rows"]}
        assert checks["closed_form_oracle_max_error"]["value"] < 1e-10
        assert checks["truncation_convergence_overlap"]["value"] >= 1 - 1e-8
        assert checks["excitation_drift_max"]["value"] < 1e-10
        assert checks["sweep_infidelity_strictly_decreasing"]["passed"]
        assert checks["infidelity_at_ratio_40"]["value"] < 0.05

    def test_stdout_output(self, capsys):
        config = parse_config(["swap", "--enumerate"])
        execute(config)
        payload = json.loads(capsys.readouterr().out)
        assert payload["results"]["summary"]["success_probability"] == pytest.approx(0.5)


class TestMainExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert main(["swap", "--n-max", "0"]) == 1
        assert "n_max" in capsys.readouterr().err

    def test_success_is_zero(self, tmp_path):
        path = tmp_path / "out.json"
        assert main(["closure", "--depth", "3", "--output-path", str(path)]) == 0

    def test_closure_violation_is_two(self, tmp_path, capsys):
        path = tmp_path / "out.json"
        code = main(
            ["closure", "--depth", "2", "--theta", "0.5", "--output-path", str(path)]
        )
        assert code == 2
        payload = json.loads(path.read_text())
        assert payload["results"]["summary"]["ok"] is False
        assert payload["results"]["summary"]["violations"]

    def test_io_error_is_three(self, capsys):
        code = main(
            ["closure", "--depth", "2", "--output-path", "/nonexistent/dir/out.json"]
        )
        assert code == 3

    def test_truncation_failure_is_two(self, tmp_path, capsys):
        code = main(
            ["sweep", "--ratios", "10", "--n-max", "1",
             "--output-path", str(tmp_path / "x.json")]
        )
        assert code == 2


class TestOutputDirectory:
    def test_env_var_applies_to_relative_paths(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        config = parse_config(["swap", "--enumerate", "--output-path", "rel.json"])
        execute(config)
        assert (tmp_path / "rel.json").exists()

    def test_env_var_ignores_absolute_paths(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, "/some/other/place")
        target = tmp_path / "abs.json"
        config = parse_config(["swap", "--enumerate", "--output-path", str(target)])
        execute(config)
        assert target.exists()
