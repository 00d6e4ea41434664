"""
Binary checkpoint format, all integers little-endian:

    magic            4 bytes  b"NCCV"
    version          uint16   (FORMAT_VERSION)
    element type     uint8    0 = float32, 1 = float64
    entry count      uint32
    epoch            uint32   completed epochs
    checksum length  uint16, then that many bytes of utf-8 (config checksum)
    entry * count:
        name length  uint16, name bytes (utf-8)
        rank         uint8, then rank * uint32 extents
        data         prod(extents) * itemsize bytes, little-endian
"""
import logging
import os
import struct
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .model import Model
from ..core.tensor import Tensor, dtype_name
from ..errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"NCCV"
FORMAT_VERSION = 1
DTYPE_TAGS = {"float32": 0, "float64": 1}
TAG_DTYPES = {tag: name for name, tag in DTYPE_TAGS.items()}

_HEADER = struct.Struct("<4sHBII")


@dataclass
class CheckpointInfo:
    epoch: int
    config_checksum: str
    dtype: str


def save_checkpoint(model: Model, path: str, epoch: int = 0, config_checksum: str = "") -> None:
    params = model.params()
    tag = DTYPE_TAGS[dtype_name(model.dtype)]
    checksum = config_checksum.encode("utf-8")
    chunks = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, tag, len(params), epoch),
        struct.pack("<H", len(checksum)),
        checksum,
    ]
    for name, value in params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<B{value.ndim}I", value.ndim, *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype=value.dtype.newbyteorder("<")).tobytes())

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = path + ".tmp"
    with open(tmp_path, "wb") as f:
        f.write(b"".join(chunks))
    os.replace(tmp_path, path)
    logger.debug("saved %d tensors to %s", len(params), path)


class _Reader:
    def __init__(self, raw: bytes, path: str):
        self.raw = raw
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.raw):
            raise CheckpointError(f"{self.path}: truncated at byte {len(self.raw)}, needed {self.offset + size}")
        chunk = self.raw[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> Tuple[int, ...]:
        values: Tuple[int, ...] = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values


def read_checkpoint_info(path: str) -> CheckpointInfo:
    """
    Header fields only; the tensors are not read.
    """
    try:
        with open(path, "rb") as f:
            head = f.read(_HEADER.size + 2)
            reader = _Reader(head, path)
            magic, version, tag, _, epoch = _HEADER.unpack(reader.take(_HEADER.size))
            if magic != MAGIC or version != FORMAT_VERSION or tag not in TAG_DTYPES:
                raise CheckpointError(f"{path}: not a version {FORMAT_VERSION} checkpoint")
            (checksum_len,) = reader.unpack("<H")
            checksum = _Reader(f.read(checksum_len), path).take(checksum_len).decode("utf-8")
    except OSError as e:
        raise CheckpointError(f"could not read checkpoint {path}: {e}") from e
    return CheckpointInfo(epoch=epoch, config_checksum=checksum, dtype=TAG_DTYPES[tag])


def read_checkpoint(path: str) -> Tuple[CheckpointInfo, Dict[str, Tensor]]:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CheckpointError(f"could not read checkpoint {path}: {e}") from e

    reader = _Reader(raw, path)
    magic, version, tag, count, epoch = _HEADER.unpack(reader.take(_HEADER.size))
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    if tag not in TAG_DTYPES:
        raise CheckpointError(f"{path}: unknown element type tag {tag}")
    dtype = np.dtype(TAG_DTYPES[tag]).newbyteorder("<")
    (checksum_len,) = reader.unpack("<H")
    checksum = reader.take(checksum_len).decode("utf-8")

    tensors: Dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack("<B")
        shape = reader.unpack(f"<{rank}I")
        size = int(np.prod(shape)) * dtype.itemsize
        tensors[name] = np.frombuffer(reader.take(size), dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
    if reader.offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - reader.offset} trailing bytes")
    return CheckpointInfo(epoch=epoch, config_checksum=checksum, dtype=TAG_DTYPES[tag]), tensors


def load_checkpoint(model: Model, path: str) -> CheckpointInfo:
    """
    Copies parameters into `model` only after the whole file has been read
    and matched against the model's names, shapes and element type.
    """
    info, tensors = read_checkpoint(path)
    model_dtype = dtype_name(model.dtype)
    if info.dtype != model_dtype:
        raise CheckpointError(f"{path}: checkpoint holds {info.dtype}, model is {model_dtype}")
    params = model.params()
    if set(params) != set(tensors):
        missing = sorted(set(params) - set(tensors))
        extra = sorted(set(tensors) - set(params))
        raise CheckpointError(f"{path}: parameter names differ (missing {missing}, unexpected {extra})")
    for name, value in params.items():
        if value.shape != tensors[name].shape:
            raise CheckpointError(
                f"{path}: {name} has shape {tensors[name].shape}, model expects {value.shape}"
            )
    for name, value in params.items():
        value[...] = tensors[name]
    logger.info("loaded %d tensors from %s (epoch %d)", len(params), path, info.epoch)
    return info
