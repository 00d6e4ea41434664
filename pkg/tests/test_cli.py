import csv
import json
import math
import os

import pytest

from ncconv.cli.utils.metrics_io import METRICS_COLUMNS
from ncconv.main import main

SMOKE = {
    "seed": 0,
    "model": {"name": "conv-linear", "widths": [4], "num_classes": 3},
    "data": {"dataset": "synth", "synth_shape": [3, 6, 6], "synth_train": 12, "synth_val": 6},
    "train": {"batch_size": 2, "epochs": 3},
}


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def with_train(**overrides):
    return {**SMOKE, "train": {**SMOKE["train"], **overrides}}


class TestGradcheck:

    def test_suite_passes(self, write_config, tmp_path, capsys):
        assert main(["gradcheck", "--config", write_config({"gradcheck": {"cases": 2}})]) == 0
        assert "gradient checks passed" in capsys.readouterr().out
        with open(tmp_path / "out" / "gradcheck.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["failed"] == 0
        assert all(case["max_relative_error"] < 1e-6 for case in report["cases"])

    def test_perturbed_gradient_fails(self, write_config):
        path = write_config({"gradcheck": {"cases": 1, "perturb_gradient": True}})
        assert main(["gradcheck", "--config", path]) == 1

    def test_unknown_key_is_usage_error(self, write_config):
        assert main(["gradcheck", "--config", write_config({"gradcheck": {"cases": 1, "bogus": 1}})]) == 2

    def test_bad_arguments(self, write_config):
        assert main(["unknown-command", "--config", write_config({})]) == 2
        assert main(["gradcheck"]) == 2


class TestVerifyTheory:

    def test_writes_reports_and_trace(self, write_config, tmp_path):
        payload = {
            **SMOKE,
            "model": {"name": "plain4", "widths": [4, 4, 4, 4], "num_classes": 3},
            "theory": {"instances": 30, "normality_patches": 50000, "trace_steps": 6, "trace_pair": "gn"},
        }
        assert main(["verify-theory", "--config", write_config(payload)]) == 0
        out = tmp_path / "out"
        with open(out / "identities.json", encoding="utf-8") as f:
            identities = json.load(f)
        assert identities["failed"] == 0 and len(identities["reports"]) == 60
        with open(out / "normality.json", encoding="utf-8") as f:
            assert [r["distribution"] for r in json.load(f)] == ["gaussian", "uniform", "heavy_tailed"]
        rows = read_csv(out / "trace.csv")
        assert len(rows) == 6
        assert all(math.isfinite(float(row["nc_loss"])) and math.isfinite(float(row["gn_loss"])) for row in rows)


class TestTrain:

    def test_outputs(self, write_config, tmp_path):
        assert main(["train", "--config", write_config(SMOKE)]) == 0
        out = tmp_path / "out"
        rows = read_csv(out / "metrics.csv")
        assert list(rows[0]) == METRICS_COLUMNS
        assert [int(r["epoch"]) for r in rows] == [0, 1, 2]
        assert all(r["schema_version"] == "1" for r in rows)
        assert len(read_csv(out / "steps.csv")) == 3 * 6
        assert sorted(os.listdir(out / "checkpoints")) == ["epoch_001.ckpt", "epoch_002.ckpt", "epoch_003.ckpt"]
        with open(out / "summary.json", encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["status"] == "completed" and summary["epochs_completed"] == 3
        assert summary["group_counts"] == [] and summary["shortcut"] == "standard"
        assert os.access(out / "resolved_config.json", os.F_OK)

    def test_deterministic_runs_are_byte_identical(self, write_config, tmp_path):
        payload = with_train(augment={"hflip": True, "shift_frac": 0.2})
        first = str(tmp_path / "first")
        second = str(tmp_path / "second")
        assert main(["train", "--config", write_config(payload), "--out", first]) == 0
        assert main(["train", "--config", write_config(payload), "--out", second]) == 0
        for name in ("metrics.csv", "steps.csv"):
            assert read_bytes(os.path.join(first, name)) == read_bytes(os.path.join(second, name))

    def test_zero_learning_rate_gives_flat_curve(self, write_config, tmp_path):
        assert main(["train", "--config", write_config(with_train(lr=0.0))]) == 0
        losses = {row["train_loss"] for row in read_csv(tmp_path / "out" / "metrics.csv")}
        assert len(losses) == 1

    def test_resume_continues_the_run(self, write_config, tmp_path):
        payload = with_train(resume=True)
        full = str(tmp_path / "full")
        resumed = str(tmp_path / "resumed")
        assert main(["train", "--config", write_config(payload), "--out", full]) == 0
        assert main(["train", "--config", write_config(payload), "--out", resumed]) == 0
        # drop the last epoch as if the run had been interrupted before writing it
        os.remove(os.path.join(resumed, "checkpoints", "epoch_003.ckpt"))
        assert main(["train", "--config", write_config(payload), "--out", resumed]) == 0
        for name in ("metrics.csv", "steps.csv"):
            assert read_bytes(os.path.join(full, name)) == read_bytes(os.path.join(resumed, name))

    def test_rerun_under_new_config_starts_from_scratch(self, write_config, tmp_path):
        shared = str(tmp_path / "shared")
        fresh = str(tmp_path / "fresh")
        other = with_train(epochs=1, lr=0.05, resume=True)
        assert main(["train", "--config", write_config(with_train(resume=True)), "--out", shared]) == 0
        assert main(["train", "--config", write_config(other), "--out", shared]) == 0
        assert main(["train", "--config", write_config(other), "--out", fresh]) == 0
        assert os.listdir(os.path.join(shared, "checkpoints")) == ["epoch_001.ckpt"]
        for name in ("metrics.csv", "steps.csv"):
            assert read_bytes(os.path.join(shared, name)) == read_bytes(os.path.join(fresh, name))

    def test_missing_dataset_is_usage_error(self, write_config, tmp_path):
        payload = {**SMOKE, "data": {"dataset": "cifar10", "path": str(tmp_path / "nowhere")}}
        assert main(["train", "--config", write_config(payload)]) == 2


class TestEval:

    def test_reports_accuracy_and_error(self, write_config, tmp_path, capsys):
        path = write_config(with_train(epochs=1))
        assert main(["train", "--config", path]) == 0
        assert main(["eval", "--config", path]) == 0
        with open(tmp_path / "out" / "epoch_001.eval.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["top1_error"] == pytest.approx(1.0 - report["top1_accuracy"])
        assert report["top5_accuracy"] == 1.0
        assert "top-5" in capsys.readouterr().out

    def test_uses_checkpoints_of_the_recorded_run(self, write_config, tmp_path):
        first = write_config(with_train(epochs=3))
        assert main(["train", "--config", first]) == 0
        second = write_config(with_train(epochs=1, lr=0.05), name="second.json")
        assert main(["train", "--config", second]) == 0
        assert main(["eval", "--config", second]) == 0
        with open(tmp_path / "out" / "epoch_001.eval.json", encoding="utf-8") as f:
            assert json.load(f)["epochs_trained"] == 1
        assert not os.access(tmp_path / "out" / "epoch_003.eval.json", os.F_OK)

    def test_does_not_overwrite_run_config(self, write_config, tmp_path):
        path = write_config(with_train(epochs=1))
        assert main(["train", "--config", path]) == 0
        before = read_bytes(tmp_path / "out" / "resolved_config.json")
        assert main(["eval", "--config", write_config(with_train(epochs=1, lr=0.3), name="eval.json")]) == 0
        assert read_bytes(tmp_path / "out" / "resolved_config.json") == before
        assert os.access(tmp_path / "out" / "eval_config.json", os.F_OK)

    def test_missing_checkpoint(self, write_config):
        assert main(["eval", "--config", write_config(SMOKE)]) == 2


class TestBench:

    def test_smoke(self, write_config, tmp_path):
        payload = {"bench": {"repeats": 1, "batch": 1, "geometries": [[2, 3, 3, 1, 1, 6], [3, 2, 1, 2, 0, 5]]}}
        assert main(["bench", "--config", write_config(payload)]) == 0
        rows = read_csv(tmp_path / "out" / "bench.csv")
        assert [r["method"] for r in rows[:4]] == ["naive", "im2col_gemm", "nc_forward", "nc_backward"]
        assert len(rows) == 8
        assert all(float(r["max_oracle_error"]) < 1e-4 for r in rows)

    def test_zero_size_geometry_rejected(self, write_config):
        payload = {"bench": {"repeats": 1, "geometries": [[0, 3, 3, 1, 1, 6]]}}
        assert main(["bench", "--config", write_config(payload)]) == 2


class TestCompare:

    @staticmethod
    def train_group(write_config, tmp_path, conv, norm, seeds):
        payload = {
            **with_train(epochs=2),
            "model": {"name": "plain4", "conv": conv, "norm": norm, "widths": [4, 4, 4, 4], "num_classes": 3},
        }
        path = write_config(payload, name=f"{conv}-{norm}.json")
        runs = []
        for seed in seeds:
            out = str(tmp_path / f"{conv}-{norm}-{seed}")
            assert main(["train", "--config", path, "--seed", str(seed), "--out", out]) == 0
            runs.append(out)
        return runs

    def test_reports_both_groups(self, write_config, tmp_path, capsys):
        nc = self.train_group(write_config, tmp_path, "nc", "none", [0, 1])
        gn = self.train_group(write_config, tmp_path, "standard", "gn", [0, 1])
        path = write_config({"compare": {"nc_runs": nc, "gn_runs": gn}}, name="compare.json")
        assert main(["compare", "--config", path]) == 0

        out = tmp_path / "out"
        with open(out / "comparison.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["nc"]["seeds"] == [0, 1] and report["gn"]["seeds"] == [0, 1]
        assert report["chance_loss"] == pytest.approx(math.log(3))
        for group in (report["nc"], report["gn"]):
            assert len(group["per_seed"]) == 2
            for run in group["per_seed"]:
                assert run["epochs"] == 2 and run["status"] == "completed"
                assert run["top1_error"] == pytest.approx(1.0 - run["top1_accuracy"])
                assert run["below_chance"] == (run["val_loss"] < report["chance_loss"])
            losses = [run["val_loss"] for run in group["per_seed"]]
            assert group["mean"]["val_loss"] == pytest.approx(sum(losses) / 2)
        assert report["all_finite"] is True
        assert report["nc_val_loss_le_gn"] == (report["nc"]["mean"]["val_loss"] <= report["gn"]["mean"]["val_loss"])
        assert report["val_loss_gap"] == pytest.approx(
            report["nc"]["mean"]["val_loss"] - report["gn"]["mean"]["val_loss"])

        rows = read_csv(out / "comparison_curves.csv")
        assert [int(r["epoch"]) for r in rows] == [0, 1]
        assert list(rows[0]) == ["epoch", "nc_train_loss", "nc_val_loss", "gn_train_loss", "gn_val_loss"]
        final = read_csv(os.path.join(nc[0], "metrics.csv"))[-1]
        assert report["nc"]["per_seed"][0]["val_loss"] == float(final["val_loss"])
        assert "GN" in capsys.readouterr().out

    def test_single_seed_has_no_p_value(self, write_config, tmp_path):
        nc = self.train_group(write_config, tmp_path, "nc", "none", [3])
        gn = self.train_group(write_config, tmp_path, "standard", "gn", [3])
        path = write_config({"compare": {"nc_runs": nc, "gn_runs": gn}}, name="compare.json")
        assert main(["compare", "--config", path]) == 0
        with open(tmp_path / "out" / "comparison.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["welch_p_value"] is None
        assert report["nc"]["std"]["val_loss"] == 0.0

    def test_untrained_run_is_usage_error(self, write_config, tmp_path):
        gn = self.train_group(write_config, tmp_path, "standard", "gn", [0])
        payload = {"compare": {"nc_runs": [str(tmp_path / "never-trained")], "gn_runs": gn}}
        assert main(["compare", "--config", write_config(payload, name="compare.json")]) == 2

    def test_empty_group_is_usage_error(self, write_config):
        assert main(["compare", "--config", write_config({"compare": {"nc_runs": ["a"]}})]) == 2
