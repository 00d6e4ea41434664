"""
Side-by-side summary of NC and GN training runs: final validation loss,
top-1/top-5 accuracy and error per seed and averaged per model, plus the
mean learning curves of both groups.
"""
import csv
import json
import logging
import math
import os
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import stats

from ..train.train import METRICS_FILE, SUMMARY_FILE
from ...utils.file_util import COMPARE_CONFIG, RESOLVED_CONFIG
from ...utils.metrics_io import write_json, write_rows_csv
from ...utils.runtime import EXIT_OK, prepare_run
from ....data_types import RunConfig
from ....errors import ConfigError, DataFormatError

logger = logging.getLogger(__name__)

COMPARISON_FILE = "comparison.json"
CURVES_FILE = "comparison_curves.csv"

FINAL_METRICS = {
    "val_loss": "val_loss",
    "top1_accuracy": "val_top1",
    "top5_accuracy": "val_top5",
    "top1_error": "val_top1_error",
    "top5_error": "val_top5_error",
}


def _read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise DataFormatError(f"{path}: top level must be an object")
    return payload


def _read_curve(path: str) -> Dict[str, List[float]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise DataFormatError(f"{path}: no epochs recorded")
    curve: Dict[str, List[float]] = {}
    for column in ("train_loss", *FINAL_METRICS.values()):
        try:
            curve[column] = [float(row[column]) for row in rows]
        except (KeyError, TypeError, ValueError) as e:
            raise DataFormatError(f"{path}: bad or missing column {column!r}") from e
    return curve


def read_run(run_dir: str) -> Dict[str, Any]:
    """
    Final metrics and learning curve of one training run directory.
    """
    metrics_path = os.path.join(run_dir, METRICS_FILE)
    config_path = os.path.join(run_dir, RESOLVED_CONFIG)
    for path in (metrics_path, config_path):
        if not os.access(path, os.F_OK):
            raise ConfigError(f"{run_dir}: {os.path.basename(path)} not found, train the run first")

    run_config = _read_json(config_path)
    try:
        seed = int(run_config["seed"])
        num_classes = int(run_config["model"]["num_classes"])
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"{config_path}: seed or model.num_classes missing") from e

    summary_path = os.path.join(run_dir, SUMMARY_FILE)
    status = _read_json(summary_path).get("status") if os.access(summary_path, os.F_OK) else None

    curve = _read_curve(metrics_path)
    chance = math.log(num_classes)
    final = {name: curve[column][-1] for name, column in FINAL_METRICS.items()}
    losses = curve["train_loss"] + curve["val_loss"]
    return {
        "run": run_dir,
        "seed": seed,
        "status": status,
        "epochs": len(curve["val_loss"]),
        **final,
        "best_val_loss": min(curve["val_loss"]),
        "chance_loss": chance,
        "below_chance": final["val_loss"] < chance,
        "all_finite": all(math.isfinite(v) for v in losses),
        "curve": curve,
    }


def summarize_group(runs: List[Dict[str, Any]]) -> Dict[str, Any]:
    mean: Dict[str, float] = {}
    std: Dict[str, float] = {}
    for name in (*FINAL_METRICS, "best_val_loss"):
        values = np.array([run[name] for run in runs], dtype=np.float64)
        mean[name] = float(values.mean())
        std[name] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return {
        "seeds": [run["seed"] for run in runs],
        "per_seed": [{k: v for k, v in run.items() if k != "curve"} for run in runs],
        "mean": mean,
        "std": std,
        "below_chance": all(run["below_chance"] for run in runs),
        "all_finite": all(run["all_finite"] for run in runs),
    }


def welch_p_value(a: List[float], b: List[float]) -> Optional[float]:
    """Two-sided Welch t-test p-value, None with fewer than two runs a side or no spread."""
    if len(a) < 2 or len(b) < 2:
        return None
    p_value = float(stats.ttest_ind(a, b, equal_var=False).pvalue)
    return p_value if math.isfinite(p_value) else None


def mean_curves(nc: List[Dict[str, Any]], gn: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """
    Per-epoch means of train and validation loss for both groups, over the
    epochs every run completed.
    """
    epochs = min(run["epochs"] for run in nc + gn)
    rows = []
    for epoch in range(epochs):
        row: Dict[str, Any] = {"epoch": epoch}
        for label, runs in (("nc", nc), ("gn", gn)):
            for column in ("train_loss", "val_loss"):
                row[f"{label}_{column}"] = float(np.mean([run["curve"][column][epoch] for run in runs]))
        rows.append(row)
    return rows


def cmd_compare(config: RunConfig) -> int:
    section = config.compare
    if not section.nc_runs or not section.gn_runs:
        raise ConfigError("compare.nc_runs and compare.gn_runs must each name at least one run directory")
    prepare_run(config, config_file=COMPARE_CONFIG)

    nc = [read_run(path) for path in section.nc_runs]
    gn = [read_run(path) for path in section.gn_runs]
    classes = {run["chance_loss"] for run in nc + gn}
    if len(classes) != 1:
        raise ConfigError("compared runs disagree on model.num_classes")

    nc_summary = summarize_group(nc)
    gn_summary = summarize_group(gn)
    nc_loss = nc_summary["mean"]["val_loss"]
    gn_loss = gn_summary["mean"]["val_loss"]
    finite = nc_summary["all_finite"] and gn_summary["all_finite"]
    report = {
        "nc": nc_summary,
        "gn": gn_summary,
        "chance_loss": classes.pop(),
        "all_finite": finite,
        "val_loss_gap": nc_loss - gn_loss,
        "nc_val_loss_le_gn": bool(finite and nc_loss <= gn_loss),
        "welch_p_value": welch_p_value([r["val_loss"] for r in nc], [r["val_loss"] for r in gn]),
    }
    write_json(os.path.join(config.output_dir, COMPARISON_FILE), report)
    write_rows_csv(os.path.join(config.output_dir, CURVES_FILE), mean_curves(nc, gn))

    logger.info("compared %d NC and %d GN run(s)", len(nc), len(gn))
    for label, summary in (("NC", nc_summary), ("GN", gn_summary)):
        mean = summary["mean"]
        print(f"{label}: val loss {mean['val_loss']:.4f}, "
              f"top-1 error {mean['top1_error']:.4f}, top-5 error {mean['top5_error']:.4f} "
              f"over seeds {summary['seeds']}")
    print(f"NC final val loss {'<=' if report['nc_val_loss_le_gn'] else '>'} GN")
    return EXIT_OK
