import json
import os
from typing import Any, Callable, Dict

import numpy as np
import pytest

from ncconv.data_types import ConvGeometry


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def write_config(tmp_path) -> Callable[[Dict[str, Any]], str]:
    """Writes a JSON run config under tmp_path, output_dir defaulting to tmp_path/out."""
    def write(payload: Dict[str, Any], name: str = "config.json") -> str:
        payload = {"output_dir": str(tmp_path / "out"), **payload}
        path = os.path.join(tmp_path, name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)
        return path
    return write


def geometry(c: int, o: int, k: int, s: int = 1, p: int = 0, h: int = 5, w: int = 5) -> ConvGeometry:
    return ConvGeometry(
        in_channels=c,
        out_channels=o,
        kernel=(k, k),
        stride=(s, s),
        padding=(p, p),
        input_size=(h, w),
    )
