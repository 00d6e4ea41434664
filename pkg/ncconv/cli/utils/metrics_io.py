import csv
import dataclasses
import json
import math
import os
from typing import Any, Dict, List, Sequence

from ...data_types import MetricsRecord, StepRecord

METRICS_SCHEMA_VERSION = 1
METRICS_COLUMNS = [
    "schema_version",
    "epoch",
    "step",
    "train_loss",
    "train_acc",
    "val_loss",
    "val_top1",
    "val_top5",
    "val_top1_error",
    "val_top5_error",
    "mean_grad_norm",
    "wall_ms",
]
STEP_COLUMNS = ["epoch", "step", "loss", "lr", "grad_norm"]


def format_value(value: Any) -> str:
    # repr keeps every bit of a float, so identical runs give identical files
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def metrics_row(record: MetricsRecord) -> List[str]:
    values: Dict[str, Any] = dataclasses.asdict(record)
    values["schema_version"] = METRICS_SCHEMA_VERSION
    values["val_top1_error"] = record.val_top1_error
    values["val_top5_error"] = record.val_top5_error
    return [format_value(values[column]) for column in METRICS_COLUMNS]


class CsvAppender:
    """
    Append-only CSV; writes the header when the file is new or empty.
    """

    def __init__(self, path: str, columns: Sequence[str]):
        self.path = path
        self.columns = list(columns)
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        if not os.access(path, os.F_OK) or os.path.getsize(path) == 0:
            with open(path, "w", encoding="utf-8", newline="") as f:
                csv.writer(f, lineterminator="\n").writerow(self.columns)

    def append(self, row: Sequence[str]) -> None:
        with open(self.path, "a", encoding="utf-8", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(row)


class MetricsWriter(CsvAppender):
    def __init__(self, path: str):
        super().__init__(path, METRICS_COLUMNS)

    def write(self, record: MetricsRecord) -> None:
        self.append(metrics_row(record))


class StepWriter(CsvAppender):
    def __init__(self, path: str):
        super().__init__(path, STEP_COLUMNS)

    def write(self, record: StepRecord) -> None:
        values = dataclasses.asdict(record)
        self.append([format_value(values[column]) for column in STEP_COLUMNS])


def truncate_csv(path: str, keep: int) -> None:
    """
    Keeps the header plus the first `keep` data rows; used when resuming so
    rows written after the resumed checkpoint are not duplicated.
    """
    if not os.access(path, os.F_OK):
        return
    with open(path, "r", encoding="utf-8") as f:
        lines = f.readlines()
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(lines[:keep + 1])


def write_rows_csv(path: str, rows: Sequence[Dict[str, Any]]) -> None:
    if os.access(path, os.F_OK):
        os.remove(path)
    columns: List[str] = []
    for row in rows:
        columns += [key for key in row if key not in columns]
    writer = CsvAppender(path, columns)
    for row in rows:
        writer.append([format_value(row.get(column, float("nan"))) for column in columns])


def write_json(path: str, payload: Any) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(payload, indent=2, default=str) + "\n")
