"""Versioned flat binary checkpoints.

Layout (all little-endian)::

    b"TIDYCKPT"             magic
    u32 version             currently 1
    u32 len, bytes          kind, utf-8 ("uodm", "planner")
    u64 step                training step counter
    u32 len, bytes          metadata, utf-8 JSON
    u32 n                   tensor count
    n x (u32 len, name bytes, u32 ndim, ndim x u32 dims)
    float64 data            every tensor, row-major, in header order
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TIDYCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _pack_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _read_str(buf: io.BytesIO) -> str:
    (n,) = struct.unpack("<I", buf.read(4))
    return buf.read(n).decode("utf-8")


def save_checkpoint(path: str | Path, kind: str, tensors: dict[str, np.ndarray], meta: dict | None = None, step: int = 0) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _pack_str(buf, kind)
    buf.write(struct.pack("<Q", int(step)))
    _pack_str(buf, json.dumps(meta or {}, sort_keys=True))
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        _pack_str(buf, name)
        arr = np.asarray(arr)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in tensors.values():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C"))
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path, kind: str | None = None):
    """Returns ``(kind, tensors, meta, step)``."""
    buf = io.BytesIO(Path(path).read_bytes())
    if buf.read(8) != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    found = _read_str(buf)
    if kind is not None and found != kind:
        raise CheckpointError(f"expected a {kind!r} checkpoint, got {found!r}")
    (step,) = struct.unpack("<Q", buf.read(8))
    meta = json.loads(_read_str(buf))
    (n,) = struct.unpack("<I", buf.read(4))
    shapes = []
    for _ in range(n):
        name = _read_str(buf)
        (ndim,) = struct.unpack("<I", buf.read(4))
        dims = struct.unpack(f"<{ndim}I", buf.read(4 * ndim)) if ndim else ()
        shapes.append((name, dims))
    tensors = {}
    for name, dims in shapes:
        count = int(np.prod(dims)) if dims else 1
        raw = buf.read(8 * count)
        if len(raw) != 8 * count:
            raise CheckpointError(f"truncated tensor {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
    return found, tensors, meta, step
