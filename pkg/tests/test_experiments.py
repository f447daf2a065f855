"""Config handling, scenario runs, sweeps, reports, CLI exit codes, replay."""

import json

import pytest

from qfluid.cli import main as cli_main
from qfluid.errors import ConfigError
from qfluid.experiments import (
    ExperimentConfig,
    OUTPUT_ROOT_ENV,
    report,
    run,
    sweep,
)


def fast_config(**extra):
    doc = {"scenario": "twofluid-verify"}
    doc.update(extra)
    return ExperimentConfig.from_dict(doc)


class TestConfig:
    def test_missing_scenario(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"dt": 1e-3})

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"scenario": "warp-drive"})

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(path)

    def test_diffusion_default_is_hbar_over_2m(self):
        cfg = fast_config(constants={"hbar": 2.0, "m": 4.0})
        assert cfg.diffusion_constant() == pytest.approx(0.25)
        cfg2 = fast_config(constants={"D": 0.75})
        assert cfg2.diffusion_constant() == 0.75

    def test_round_trip_dict(self):
        cfg = fast_config(delta_t=5e-5, output_dir="x")
        assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()

    def test_unknown_key_named_in_error(self, tmp_path):
        with pytest.raises(ConfigError, match="delta_T"):
            run(fast_config(delta_T=1e-4), tmp_path)


class TestRun:
    def test_twofluid_verify_passes_and_writes(self, tmp_path):
        manifest = run(fast_config(), tmp_path)
        assert manifest.passed
        assert manifest.metrics["rel_err_vs_gradQ"] <= 1e-3
        assert (tmp_path / "run_manifest.json").exists()
        assert (tmp_path / "convergence.csv").exists()
        doc = json.loads((tmp_path / "run_manifest.json").read_text())
        assert {c["name"] for c in doc["criteria"]} == {
            "rel_err_vs_gradQ", "fit_coefficient_rel_dev",
        }
        assert all(c["pass"] for c in doc["criteria"])

    def test_oracle_ground_state(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            {"scenario": "oracle-evolve", "kind": "harmonic-ground",
             "dt": 1e-3, "steps": 500}
        )
        manifest = run(cfg, tmp_path)
        assert manifest.passed
        assert manifest.metrics["norm_drift"] <= 1e-9

    def test_tolerance_overrides(self, tmp_path):
        cfg = fast_config(tolerances={"rel_err": 1e-9})
        manifest = run(cfg, tmp_path)
        assert not manifest.passed

    def test_replay_is_byte_identical(self, tmp_path):
        cfg = fast_config()
        run(cfg, tmp_path / "one")
        run(cfg, tmp_path / "two")
        for name in ("convergence.csv", "quantum_potential.csv",
                     "averaged_acceleration_x.csv"):
            a = (tmp_path / "one" / name).read_bytes()
            b = (tmp_path / "two" / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"
        m1 = json.loads((tmp_path / "one" / "run_manifest.json").read_text())
        m2 = json.loads((tmp_path / "two" / "run_manifest.json").read_text())
        m1.pop("wall_time_s")
        m2.pop("wall_time_s")
        assert m1 == m2

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
        monkeypatch.chdir(tmp_path)
        cfg = ExperimentConfig.from_dict(
            {"scenario": "twofluid-verify", "output_dir": "sub/place"}
        )
        run(cfg)
        assert (tmp_path / "sub" / "place" / "run_manifest.json").exists()


class TestSweep:
    def test_needs_three_values(self, tmp_path):
        with pytest.raises(ConfigError):
            sweep(fast_config(), "delta_t", [1e-4, 5e-5], tmp_path)

    def test_twofluid_delta_t_sweep_monotone(self, tmp_path):
        result = sweep(fast_config(), "delta_t", [2e-4, 1e-4, 5e-5], tmp_path)
        assert result.metrics[0] > result.metrics[1] > result.metrics[2]
        assert (tmp_path / "sweep.csv").exists()
        assert result.fitted_order == pytest.approx(1.0, abs=0.15)


class TestReport:
    def test_aggregates_and_flags_failures(self, tmp_path):
        run(fast_config(), tmp_path / "good")
        run(fast_config(tolerances={"rel_err": 1e-9}), tmp_path / "bad")
        summary = report(tmp_path)
        assert summary.total == 2
        assert summary.passed == 1
        assert len(summary.failures) == 1
        assert not summary.ok
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "report.txt").read_text().endswith("FAIL\n")

    def test_all_pass(self, tmp_path):
        run(fast_config(), tmp_path / "a")
        summary = report(tmp_path)
        assert summary.ok

    def test_empty_metrics_is_integrity_failure(self, tmp_path):
        run(fast_config(), tmp_path / "a")
        doc = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
        doc["metrics"] = {}
        (tmp_path / "a" / "run_manifest.json").write_text(json.dumps(doc))
        summary = report(tmp_path)
        assert summary.integrity_errors
        assert not summary.ok

    def test_no_manifests_is_an_error(self, tmp_path):
        with pytest.raises(ConfigError):
            report(tmp_path)


class TestCli:
    def write_config(self, tmp_path, doc):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_run_pass_exit_zero(self, tmp_path, capsys):
        cfg = self.write_config(
            tmp_path, {"scenario": "twofluid-verify",
                       "output_dir": str(tmp_path / "out")}
        )
        assert cli_main(["run", cfg]) == 0
        out = capsys.readouterr().out
        assert "PASS rel_err_vs_gradQ" in out

    def test_run_fail_exit_one(self, tmp_path):
        cfg = self.write_config(
            tmp_path,
            {"scenario": "twofluid-verify", "output_dir": str(tmp_path / "out"),
             "tolerances": {"rel_err": 1e-9}},
        )
        assert cli_main(["run", cfg]) == 1

    def test_bad_config_exit_two(self, tmp_path):
        cfg = self.write_config(tmp_path, {"scenario": "nope"})
        assert cli_main(["run", cfg]) == 2

    def test_missing_file_exit_two(self, tmp_path):
        assert cli_main(["run", str(tmp_path / "absent.json")]) == 2

    def test_sweep_and_report_flow(self, tmp_path, capsys):
        out_dir = tmp_path / "runs"
        cfg = self.write_config(
            tmp_path, {"scenario": "twofluid-verify", "output_dir": str(out_dir)}
        )
        code = cli_main(
            ["sweep", cfg, "--param", "delta_t", "--values", "2e-4,1e-4,5e-5"]
        )
        assert code == 0
        assert "fitted order" in capsys.readouterr().out
        assert cli_main(["report", str(out_dir)]) == 0

    def test_bad_values_exit_two(self, tmp_path):
        cfg = self.write_config(
            tmp_path, {"scenario": "twofluid-verify",
                       "output_dir": str(tmp_path / "o")}
        )
        assert cli_main(["sweep", cfg, "--param", "delta_t",
                         "--values", "a,b,c"]) == 2
