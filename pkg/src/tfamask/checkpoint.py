"""Binary checkpoint I/O.

Layout, all little-endian: 4-byte magic "TFA1", uint32 tensor count, then
per tensor: uint32 name length, UTF-8 name, uint32 rank, uint32 dims,
float32 payload in row-major order. Tensors are written in dict insertion
order, so a save is byte-deterministic for a given parameter dict.
"""

from __future__ import annotations

import struct

import numpy as np

from .autodiff import Tensor
from .errors import DataError

MAGIC = b"TFA1"


def _as_array(value) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def save_checkpoint(params: dict, path) -> None:
    chunks = [MAGIC, struct.pack("<I", len(params))]
    for name, value in params.items():
        arr = np.ascontiguousarray(_as_array(value), dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint into {name: float32 array}, validating structure."""
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise DataError(f"{path}: truncated checkpoint while reading {what}")
        piece = blob[pos:pos + n]
        pos += n
        return piece

    pos = 0
    if take(4, "magic") != MAGIC:
        raise DataError(f"{path}: not a {MAGIC.decode()} checkpoint")
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = struct.unpack("<I", take(4, f"name length of tensor {i}"))
        name = take(name_len, f"name of tensor {i}").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, f"rank of {name}"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"dims of {name}"))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = take(4 * size, f"payload of {name}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes after last tensor")
    return out


def load_into(params: dict[str, Tensor], path) -> None:
    """Load a checkpoint into an existing parameter dict, insisting the two
    agree on tensor names and shapes; the first mismatch is reported."""
    loaded = load_checkpoint(path)
    for name, arr in loaded.items():
        if name not in params:
            raise DataError(f"{path}: checkpoint tensor {name!r} not in model")
        have = params[name].data.shape
        if have != arr.shape:
            raise DataError(f"{path}: tensor {name!r} has shape {arr.shape}, "
                            f"model expects {have}")
    for name in params:
        if name not in loaded:
            raise DataError(f"{path}: model tensor {name!r} missing from checkpoint")
    for name, arr in loaded.items():
        params[name].data = arr.astype(params[name].data.dtype)
        params[name].grad = np.zeros_like(params[name].data)
