import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mpslab import cli, experiments
from mpslab.errors import ScanAbortedError
from mpslab.experiments import (ExperimentConfig, ScanResult,
                                config_from_dict, emit_outputs,
                                find_optimal_chi, run_bond_scan,
                                run_epsilon_scan, run_trainsize_scan)

TINY = ExperimentConfig(chi_list=(2, 3, 4), ntr_list=(60,), eps_list=(0.3,),
                        replicates=3, base_seed=500, n_test=64)


def synthetic_scan(means, stds=None):
    means = np.asarray(means, dtype=float)
    stds = np.zeros_like(means) if stds is None else np.asarray(stds)
    axis = list(range(2, 2 + len(means)))
    return ScanResult(axis_name="chi", axis=axis, mean=means, std=stds,
                      count=np.full(len(means), 5), raw_header=[],
                      raw_rows=[], metric="inv_test_loss")


class TestFindOptimalChi:
    def test_monotone_decreasing_picks_largest(self):
        scan = synthetic_scan([5.0, 4.0, 3.0, 2.0])
        assert find_optimal_chi(scan)[0] == 5

    def test_convex_minimum(self):
        means = [(v - 7) ** 2 + 1 for v in range(2, 13)]
        assert find_optimal_chi(synthetic_scan(means))[0] == 7

    def test_ties_break_to_smaller(self):
        scan = synthetic_scan([3.0, 1.0, 1.0, 2.0])
        assert find_optimal_chi(scan)[0] == 3


class TestBondScan:
    def test_single_replicate_zero_sigma(self):
        cfg = ExperimentConfig(chi_list=(2, 3), ntr_list=(50,),
                               replicates=1, base_seed=7, n_test=32)
        scan = run_bond_scan(cfg)
        np.testing.assert_array_equal(scan.std, [0.0, 0.0])
        np.testing.assert_array_equal(scan.count, [1, 1])

    def test_replicate_seed_protocol(self):
        scan = run_bond_scan(TINY)
        seeds = {r["replicate"]: r["train_seed"] for r in scan.raw_rows}
        assert seeds == {0: 500, 1: 501, 2: 502}

    def test_aggregation_matches_raw(self):
        scan = run_bond_scan(TINY)
        for k, chi in enumerate(scan.axis):
            vals = [r["inv_test_loss"] for r in scan.raw_rows
                    if r["axis"] == chi]
            assert scan.mean[k] == pytest.approx(np.mean(vals), abs=1e-12)
            assert scan.std[k] == pytest.approx(np.std(vals, ddof=1),
                                                abs=1e-12)

    def test_both_method_columns(self):
        cfg = ExperimentConfig(chi_list=(2, 3), ntr_list=(60,), replicates=2,
                               base_seed=11, n_test=48, method="both",
                               sweeps=2, cg_steps=2)
        scan = run_bond_scan(cfg)
        assert scan.metric == "dmrg_test_loss"
        for row in scan.raw_rows:
            assert {"inv_test_loss", "dmrg_test_loss",
                    "dmrg_best_sweep"} <= set(row)

    def test_abort_on_failures(self, monkeypatch):
        def broken(*args, **kwargs):
            raise RuntimeError("boom")
        monkeypatch.setattr(experiments, "_regression_replicate", broken)
        with pytest.raises(ScanAbortedError):
            run_bond_scan(TINY)


class TestOtherScans:
    def test_epsilon_scan_single_value_reduces_to_bond_scan(self):
        multi = run_epsilon_scan(TINY)
        direct = run_bond_scan(TINY)
        assert multi.outer_values == [0.3]
        np.testing.assert_array_equal(multi.scans[0].mean, direct.mean)

    def test_trainsize_scan_single_point(self):
        cfg = ExperimentConfig(chi_list=(4,), ntr_list=(80,), replicates=2,
                               base_seed=9, n_test=32)
        scan = run_trainsize_scan(cfg)
        assert scan.axis == [80]
        assert scan.axis_name == "ntr"

    def test_trainsize_scan_axis(self):
        cfg = ExperimentConfig(chi_list=(4,), ntr_list=(60, 90), replicates=2,
                               base_seed=9, n_test=32)
        scan = run_trainsize_scan(cfg)
        assert scan.axis == [60, 90]
        assert all(r["axis"] == r["ntr"] for r in scan.raw_rows)


class TestEmit:
    def test_files_and_contracts(self, tmp_path):
        scan = run_bond_scan(TINY)
        paths = emit_outputs(scan, TINY, tmp_path / "out")
        with open(paths["summary"]) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(scan.axis)
        assert list(rows[0]) == ["axis", "mean", "std", "n"]
        # summary recomputes from raw.csv
        with open(paths["raw"]) as fh:
            raw = list(csv.DictReader(fh))
        for row in rows:
            vals = [float(r["inv_test_loss"]) for r in raw
                    if r["axis"] == row["axis"]]
            assert float(row["mean"]) == pytest.approx(np.mean(vals),
                                                       abs=1e-12)
        ET.parse(paths["figure"])  # well-formed XML

    def test_manifest_rerun_bitwise(self, tmp_path):
        scan = run_bond_scan(TINY)
        paths = emit_outputs(scan, TINY, tmp_path / "a")
        with open(paths["manifest"]) as fh:
            cfg2 = config_from_dict(json.load(fh))
        scan2 = run_bond_scan(cfg2)
        paths2 = emit_outputs(scan2, cfg2, tmp_path / "b")
        assert open(paths["raw"]).read() == open(paths2["raw"]).read()

    def test_parallel_jobs_match_serial(self, tmp_path):
        serial = run_bond_scan(TINY)
        import dataclasses
        parallel = run_bond_scan(dataclasses.replace(TINY, jobs=2))
        np.testing.assert_array_equal(serial.mean, parallel.mean)
        assert serial.raw_rows == parallel.raw_rows


class TestMnistScans:
    @pytest.fixture()
    def tiny_images(self):
        from mpslab.classify import ImageDataset
        rng = np.random.default_rng(0)
        # separable classes: dark half vs bright half
        images = np.concatenate([rng.uniform(0, 0.3, size=(30, 2, 2)),
                                 rng.uniform(0.7, 1.0, size=(30, 2, 2))])
        labels = np.array([0] * 30 + [1] * 30)
        pool = ImageDataset(images, labels, num_classes=2)
        test = ImageDataset(images[::3], labels[::3], num_classes=2)
        return pool, test

    def test_bond_scan_rows(self, tiny_images):
        pool, test = tiny_images
        cfg = ExperimentConfig(chi_list=(2, 3), ntr_list=(24,), replicates=2,
                               base_seed=5, sweeps=2, cg_steps=2)
        scan = experiments.run_mnist_bond_scan(cfg, pool, test)
        assert scan.metric == "test_error"
        assert len(scan.raw_rows) == 4
        assert all(0.0 <= r["test_error"] <= 1.0 for r in scan.raw_rows)
        assert all("train_accuracy" in r for r in scan.raw_rows)

    def test_noise_scan_levels(self, tiny_images):
        pool, test = tiny_images
        cfg = ExperimentConfig(chi_list=(2,), ntr_list=(24,), replicates=1,
                               base_seed=5, sweeps=1, cg_steps=2,
                               noise_levels=(0.0, 0.25))
        multi = experiments.run_noise_scan(cfg, pool, test)
        assert multi.outer_values == [0.0, 0.25]
        noises = {r["noise"] for s in multi.scans for r in s.raw_rows}
        assert noises == {0.0, 0.25}

    def test_trainsize_scan_axis(self, tiny_images):
        pool, test = tiny_images
        cfg = ExperimentConfig(chi_list=(2,), ntr_list=(16, 32), replicates=1,
                               base_seed=5, sweeps=1, cg_steps=2)
        scan = experiments.run_mnist_trainsize_scan(cfg, pool, test)
        assert scan.axis == [16, 32]


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            config_from_dict({"bond_dim": 4})

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(replicates=0).validate()
        with pytest.raises(ValueError):
            ExperimentConfig(method="newton").validate()
        with pytest.raises(ValueError):
            ExperimentConfig(chi_list=()).validate()

    def test_scenario_presets(self):
        cfg = experiments.scenario_config(ExperimentConfig(scenario="fig2"))
        assert cfg.ntr_list == tuple(range(50, 801, 50))
        assert cfg.replicates == 8
        full = experiments.scenario_config(
            ExperimentConfig(scenario="fig2", full=True))
        assert full.replicates == 100
        fig4 = experiments.scenario_config(
            ExperimentConfig(scenario="fig4", full=True))
        assert fig4.method == "both"
        assert fig4.replicates == 32


class TestCli:
    def test_parse_lists(self):
        assert cli.parse_int_list("2..5") == (2, 3, 4, 5)
        assert cli.parse_int_list("50:200:50") == (50, 100, 150, 200)
        assert cli.parse_int_list("2,9") == (2, 9)
        assert cli.parse_float_list("0.1,0.2") == (0.1, 0.2)

    def test_bad_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["frobnicate"])
        assert err.value.code == 2

    def test_gen_and_scan_round_trip(self, tmp_path):
        out = tmp_path / "d.csv"
        assert cli.main(["gen", "--ntr", "40", "--seed", "3",
                         "--out", str(out)]) == 0
        assert out.exists()
        scan_dir = tmp_path / "scan"
        code = cli.main(["scan", "--chi", "2,3", "--ntr", "50",
                         "--replicates", "2", "--seed", "77",
                         "--out", str(scan_dir)])
        assert code == 0
        assert (scan_dir / "raw.csv").exists()
        rerun_dir = tmp_path / "rerun"
        code = cli.main(["scan", "--config", str(scan_dir / "manifest.json"),
                         "--out", str(rerun_dir)])
        assert code == 0
        assert (rerun_dir / "raw.csv").read_text() == (
            scan_dir / "raw.csv").read_text()

    def test_validation_failure_exits_2(self, tmp_path):
        code = cli.main(["scan", "--replicates", "0",
                         "--out", str(tmp_path / "x")])
        assert code == 2

    def test_aborted_scan_exits_3(self, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise RuntimeError("boom")
        monkeypatch.setattr(experiments, "_regression_replicate", broken)
        code = cli.main(["scan", "--chi", "2", "--ntr", "50",
                         "--replicates", "2", "--out", str(tmp_path / "y")])
        assert code == 3

    def test_missing_mnist_files_exit_2(self, tmp_path):
        code = cli.main(["mnist", "--images", "/nonexistent/i",
                         "--labels", "/nonexistent/l",
                         "--test-images", "/nonexistent/ti",
                         "--test-labels", "/nonexistent/tl",
                         "--out", str(tmp_path / "m")])
        assert code == 2

    def test_exact_subcommand(self, capsys):
        assert cli.main(["exact", "--ntr", "80", "--chi", "4",
                         "--seed", "5", "--n-test", "64"]) == 0
        out = capsys.readouterr().out
        assert "train_loss=" in out and "test_loss=" in out

    def test_dmrg_subcommand(self, tmp_path, capsys):
        out_dir = tmp_path / "dm"
        assert cli.main(["dmrg", "--ntr", "60", "--chi", "3", "--sweeps", "2",
                         "--seed", "5", "--n-test", "48",
                         "--out", str(out_dir)]) == 0
        assert (out_dir / "trace.csv").exists()
        assert (out_dir / "model.npz").exists()
