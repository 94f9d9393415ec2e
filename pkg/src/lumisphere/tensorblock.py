"""Tensor-block files: the interchange format for external predictors.

Layout: magic "TBLK", u32 version, u32 rank, rank x u64 dims, then
row-major float32 payload, everything little-endian. Predictors write
these beside the dataset; the harness reads them back and validates
shape before use.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"TBLK"
VERSION = 1


class TensorBlockError(ValueError):
    """Raised for malformed tensor-block files."""


def write_tensor_block(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float32)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, data.ndim))
        f.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        f.write(np.ascontiguousarray(data).astype("<f4").tobytes())


def read_tensor_block(path) -> np.ndarray:
    with open(path, "rb") as f:
        payload = f.read()
    if payload[:4] != MAGIC:
        raise TensorBlockError(f"{path}: bad magic {payload[:4]!r}")
    if len(payload) < 12:
        raise TensorBlockError(f"{path}: truncated header")
    version, rank = struct.unpack("<II", payload[4:12])
    if version != VERSION:
        raise TensorBlockError(f"{path}: unsupported version {version}")
    if rank == 0 or rank > 8:
        raise TensorBlockError(f"{path}: implausible rank {rank}")
    if len(payload) < 12 + 8 * rank:
        raise TensorBlockError(f"{path}: truncated dimension list")
    dims = struct.unpack(f"<{rank}Q", payload[12 : 12 + 8 * rank])
    count = 1
    for d in dims:
        count *= d
    body = payload[12 + 8 * rank :]
    if len(body) != count * 4:
        raise TensorBlockError(
            f"{path}: payload holds {len(body)} bytes, dims {dims} need {count * 4}"
        )
    return np.frombuffer(body, dtype="<f4").reshape(dims).copy()
