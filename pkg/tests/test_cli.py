"""Command line interface: configs, outputs, exit codes.

Most tests drive ``shortchain.cli.main`` in process for speed; one test
runs the installed module through a real subprocess.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from shortchain.cli import EXIT_ERROR, EXIT_OK, EXIT_UNRELIABLE, main


def write_config(tmp_path, name="config.json", **updates):
    cfg = {
        "target": {"kind": "gaussian_correlated", "dimension": 2,
                   "correlation": 0.3},
        "approximation": {"kind": "mean_field_gaussian"},
        "kernel": "mala",
        "seed": 42,
        "overrides": {"chains": 100, "iterations": 12},
    }
    cfg.update(updates)
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


class TestSizingCommand:
    def test_barker_thirty_dimensional(self, capsys):
        assert main(["sizing", "--kernel", "barker", "--dimension", "30"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "chains N            387" in out
        assert "chains (mean rule)  387" in out
        assert "chains (var rule)   260" in out
        assert "iterations T        155" in out
        assert "target acceptance   0.4" in out

    def test_random_walk_step_size(self, capsys):
        assert main(["sizing", "--kernel", "rwmh", "--dimension", "10"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "initial step size   0.576" in out
        assert "iterations T        107" in out

    def test_hamiltonian_budget(self, capsys):
        assert main(["sizing", "--kernel", "hmc", "--dimension", "16"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "iterations T        10" in out
        assert "initial step size   2.88" in out

    def test_custom_tolerances(self, capsys):
        assert main(["sizing", "--kernel", "rwmh", "--dimension", "4",
                     "--delta-mean", "1.0", "--delta-var", "2.0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "chains N            7" in out

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "shortchain", "sizing", "--kernel", "rwmh",
             "--dimension", "10"],
            capture_output=True, text=True)
        assert proc.returncode == EXIT_OK
        assert "0.576" in proc.stdout


class TestRunCommand:
    def test_successful_run_writes_outputs(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_OK
        assert (out_dir / "report.json").exists()
        assert (out_dir / "bounds.csv").exists()
        assert (out_dir / "reliability.csv").exists()
        assert not (out_dir / "traces.csv").exists()
        printed = capsys.readouterr().out
        assert "chains=100" in printed
        assert "reliability PASSED" in printed

    def test_report_is_byte_reproducible(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg), "--out", str(a)]) == EXIT_OK
        assert main(["run", "--config", str(cfg), "--out", str(b)]) == EXIT_OK
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_report_round_trips_through_json(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out_dir)])
        report = json.loads((out_dir / "report.json").read_text())
        assert report["kernel"] == "mala"
        assert report["chains"] == 100
        assert report["iterations"] == 12
        assert report["seed"] == 42
        assert len(report["functionals"]) == 4
        assert len(report["acceptance_history"]) == 12
        assert "wall_time" not in json.dumps(report)

    def test_bounds_csv_matches_report(self, tmp_path):
        cfg = write_config(tmp_path)
        out_dir = tmp_path / "out"
        main(["run", "--config", str(cfg), "--out", str(out_dir)])
        report = json.loads((out_dir / "report.json").read_text())
        rows = read_csv(out_dir / "bounds.csv")
        by_tag = {f["tag"]: f for f in report["functionals"]}
        assert len(rows) == len(report["functionals"])
        for row in rows:
            assert float(row["bound"]) == by_tag[row["functional_tag"]]["bound"]

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        main(["run", "--config", str(cfg), "--out", str(a)])
        main(["run", "--config", str(cfg), "--out", str(b), "--seed", "42"])
        main(["run", "--config", str(cfg), "--out", str(c), "--seed", "7"])
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        assert (a / "report.json").read_bytes() != (c / "report.json").read_bytes()

    def test_threads_flag_does_not_change_outputs(self, tmp_path):
        cfg = write_config(tmp_path, overrides={"chains": 130, "iterations": 8})
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(cfg), "--out", str(a)])
        main(["run", "--config", str(cfg), "--out", str(b), "--threads", "4"])
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_frozen_chains_exit_two_with_outputs(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            overrides={"chains": 50, "iterations": 10, "step_size_scale": 1e-8})
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_UNRELIABLE
        captured = capsys.readouterr()
        assert "remember their initialization" in captured.err
        report = json.loads((out_dir / "report.json").read_text())
        assert report["reliability"]["passed"] is False

    def test_functional_wildcards_expand(self, tmp_path):
        cfg = write_config(tmp_path, functionals=["mean(*)", "quantile(0, 0.5)"])
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_OK
        report = json.loads((out_dir / "report.json").read_text())
        tags = [f["tag"] for f in report["functionals"]]
        assert tags == ["mean(0)", "mean(1)", "quantile(0,0.5)"]

    def test_empirical_approximation_from_npy(self, tmp_path):
        stream = np.random.default_rng(0)
        samples = stream.normal(size=(500, 2))
        npy = tmp_path / "draws.npy"
        np.save(npy, samples)
        cfg = write_config(
            tmp_path,
            approximation={"kind": "empirical", "samples_path": str(npy)})
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_OK

    def test_vector_parameters_broadcast(self, tmp_path):
        cfg = write_config(
            tmp_path,
            target={"kind": "gaussian_correlated", "dimension": 3,
                    "correlation": 0.2, "variances": 2.5},
            approximation={"kind": "kl_optimal_mean_field"})
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_OK


class TestTraceCommand:
    def test_trace_outputs(self, tmp_path):
        cfg = write_config(tmp_path, trace_every=5,
                           functionals=["mean(0)", "variance(0)"])
        out_dir = tmp_path / "out"
        assert main(["trace", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_OK
        rows = read_csv(out_dir / "traces.csv")
        # checkpoints 0, 5, 10 plus the final iteration 12, two functionals each
        assert len(rows) == 8
        t0 = [r for r in rows if r["t"] == "0"]
        assert all(float(r["rho2_max"]) == 1.0 for r in t0)

    def test_trace_defaults_to_every_iteration(self, tmp_path):
        cfg = write_config(tmp_path, functionals=["mean(0)"])
        out_dir = tmp_path / "out"
        assert main(["trace", "--config", str(cfg), "--out", str(out_dir)]) == EXIT_OK
        rows = read_csv(out_dir / "traces.csv")
        assert [r["t"] for r in rows] == [str(t) for t in range(13)]

    def test_final_trace_row_matches_report(self, tmp_path):
        cfg = write_config(tmp_path, trace_every=3, functionals=["variance(1)"])
        out_dir = tmp_path / "out"
        main(["trace", "--config", str(cfg), "--out", str(out_dir)])
        report = json.loads((out_dir / "report.json").read_text())
        rows = read_csv(out_dir / "traces.csv")
        final = [r for r in rows if r["t"] == "12"]
        assert len(final) == 1
        assert float(final[0]["bound"]) == report["functionals"][0]["bound"]


class TestErrorHandling:
    def test_malformed_json_reports_location(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "target": {,}\n}\n')
        out_dir = tmp_path / "out"
        assert main(["run", "--config", str(bad), "--out", str(out_dir)]) == EXIT_ERROR
        err = capsys.readouterr().err
        assert "line 2" in err
        assert not out_dir.exists()

    def test_unknown_top_level_key_named(self, tmp_path, capsys):
        cfg = write_config(tmp_path, chains=50)  # belongs under overrides
        assert main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        err = capsys.readouterr().err
        assert "chains" in err
        assert "allowed keys" in err

    def test_unknown_target_kind(self, tmp_path, capsys):
        cfg = write_config(tmp_path, target={"kind": "cauchy", "dimension": 2})
        assert main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        assert "target.kind" in capsys.readouterr().err

    def test_wrong_vector_length(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            target={"kind": "gaussian_correlated", "dimension": 3,
                    "variances": [1.0, 2.0]})
        assert main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        assert "length 3" in capsys.readouterr().err

    def test_missing_required_key(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({
            "target": {"kind": "funnel", "dimension": 3},
            "approximation": {"kind": "mean_field_gaussian"},
            "kernel": "rwmh"}))
        assert main(["run", "--config", str(cfg_path), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        assert "seed" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "out")]) == EXIT_ERROR

    def test_missing_samples_path(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            approximation={"kind": "empirical",
                           "samples_path": str(tmp_path / "nope.npy")})
        assert main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        assert "samples_path" in capsys.readouterr().err

    def test_non_integer_seed(self, tmp_path, capsys):
        cfg = write_config(tmp_path, seed=1.5)
        assert main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        assert "seed" in capsys.readouterr().err

    def test_boolean_is_not_a_number(self, tmp_path, capsys):
        cfg = write_config(tmp_path, alpha=True)
        assert main(["run", "--config", str(cfg), "--out",
                     str(tmp_path / "out")]) == EXIT_ERROR
        assert "alpha" in capsys.readouterr().err


class TestPresets:
    @pytest.mark.parametrize("preset", [
        "gaussian_correlated_d30.json",
        "gaussian_correlated_d10.json",
        "funnel_d20.json",
    ])
    def test_presets_validate(self, preset, tmp_path):
        from pathlib import Path

        from shortchain.cli import build_run, load_config

        path = Path(__file__).resolve().parent.parent / "presets" / preset
        cfg = load_config(path)
        run_config, target, approximation = build_run(cfg)
        assert target.dimension == approximation.dimension
        assert run_config.kernel in ("rwmh", "mala", "barker", "hmc")
