import os
import struct

import numpy as np
import pytest

from ncconv.cli.utils.file_util import checkpoint_path, clear_checkpoints, latest_checkpoint
from ncconv.core.tensor import make_rng
from ncconv.errors import CheckpointError
from ncconv.network.checkpoint import MAGIC, load_checkpoint, read_checkpoint, read_checkpoint_info, save_checkpoint
from ncconv.network.model import build
from ncconv.network.presets import resnet8


def small_resnet(seed: int, dtype=np.float32):
    return build(resnet8("nc", "gn", widths=(4, 8, 8), num_classes=3, input_shape=(3, 8, 8)), make_rng(seed), dtype)


class TestCheckpoint:

    def test_round_trip_is_exact(self, tmp_path, rng):
        path = str(tmp_path / "model.ckpt")
        source = small_resnet(0)
        save_checkpoint(source, path, epoch=7, config_checksum="abc123")
        target = small_resnet(1)
        info = load_checkpoint(target, path)
        assert (info.epoch, info.config_checksum, info.dtype) == (7, "abc123", "float32")
        x = rng.standard_normal((2, 3, 8, 8))
        np.testing.assert_array_equal(target.forward(x), source.forward(x))
        assert not os.access(path + ".tmp", os.F_OK)

    def test_header_layout(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        model = small_resnet(0, np.float64)
        save_checkpoint(model, path, epoch=3)
        with open(path, "rb") as f:
            raw = f.read()
        magic, version, tag, count, epoch = struct.unpack("<4sHBII", raw[:15])
        assert (magic, version, tag, count, epoch) == (MAGIC, 1, 1, len(model.params()), 3)

    @pytest.mark.parametrize("cut", [3, 20, -1])
    def test_truncated_file_leaves_model_untouched(self, tmp_path, cut):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(small_resnet(0), path)
        with open(path, "rb") as f:
            raw = f.read()
        with open(path, "wb") as f:
            f.write(raw[:cut])
        target = small_resnet(1)
        before = {name: value.copy() for name, value in target.params().items()}
        with pytest.raises(CheckpointError):
            load_checkpoint(target, path)
        for name, value in target.params().items():
            np.testing.assert_array_equal(value, before[name])

    def test_element_type_mismatch(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(small_resnet(0, np.float64), path)
        with pytest.raises(CheckpointError, match="float64"):
            load_checkpoint(small_resnet(0, np.float32), path)

    def test_architecture_mismatch(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(small_resnet(0), path)
        other = build(resnet8("nc", "none", widths=(4, 8, 8), num_classes=3, input_shape=(3, 8, 8)), make_rng(0))
        with pytest.raises(CheckpointError, match="names differ"):
            load_checkpoint(other, path)

    def test_trailing_bytes_and_bad_magic(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(small_resnet(0), path)
        with open(path, "ab") as f:
            f.write(b"\x00")
        with pytest.raises(CheckpointError, match="trailing"):
            read_checkpoint(path)
        with open(path, "wb") as f:
            f.write(b"XXXX" + bytes(20))
        with pytest.raises(CheckpointError, match="not a checkpoint"):
            read_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            read_checkpoint(str(tmp_path / "absent.ckpt"))


class TestCheckpointLookup:

    def test_header_info_without_tensors(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(small_resnet(0, np.float64), path, epoch=4, config_checksum="f00d")
        info = read_checkpoint_info(path)
        assert (info.epoch, info.config_checksum, info.dtype) == (4, "f00d", "float64")

    def test_latest_skips_other_configs(self, tmp_path):
        out = str(tmp_path)
        model = small_resnet(0)
        save_checkpoint(model, checkpoint_path(out, 1), 1, "mine")
        save_checkpoint(model, checkpoint_path(out, 2), 2, "mine")
        save_checkpoint(model, checkpoint_path(out, 3), 3, "theirs")
        with open(checkpoint_path(out, 4), "wb") as f:
            f.write(b"junk")
        assert latest_checkpoint(out) == checkpoint_path(out, 4)
        assert latest_checkpoint(out, "mine") == checkpoint_path(out, 2)
        assert latest_checkpoint(out, "theirs") == checkpoint_path(out, 3)
        assert latest_checkpoint(out, "nobody") is None

    def test_clear(self, tmp_path):
        out = str(tmp_path)
        save_checkpoint(small_resnet(0), checkpoint_path(out, 1), 1, "mine")
        clear_checkpoints(out)
        assert latest_checkpoint(out) is None
        clear_checkpoints(out)
