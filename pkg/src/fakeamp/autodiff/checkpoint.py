"""Binary parameter checkpoints.

Layout (little-endian): magic "CKPT", version u32, count u32, then per entry
name length u32 + UTF-8 name, rank u32, dims u32 x rank, float32 data.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .params import ParamStore

MAGIC = b"CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: ParamStore, path):
    path = Path(path)
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<II", VERSION, len(params))
    for name, tensor in params.items():
        encoded = name.encode("utf-8")
        # note: ascontiguousarray would promote rank-0 params to rank 1
        arr = np.asarray(tensor.data, dtype="<f4", order="C")
        payload += struct.pack("<I", len(encoded))
        payload += encoded
        payload += struct.pack("<I", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.tobytes()
    # atomic write: temp file in the same directory, then rename
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.blob):
            raise CheckpointError(
                f"truncated checkpoint: needed {n} bytes for {what} at byte offset "
                f"{self.offset}, file has {len(self.blob)}"
            )
        chunk = self.blob[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    r = _Reader(blob)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r} at byte offset 0, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    count = r.u32("entry count")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = r.u32("name length")
        name = r.take(name_len, "name").decode("utf-8")
        rank = r.u32("rank")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims")) if rank else ()
        n = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(r.take(4 * n, f"data of {name!r}"), dtype="<f4")
        out[name] = data.reshape(dims).astype(np.float32)
    if r.offset != len(blob):
        raise CheckpointError(
            f"trailing garbage: {len(blob) - r.offset} unexpected bytes at offset {r.offset}"
        )
    return out


def load_into(params: ParamStore, path, strict: bool = True):
    params.load_arrays(load_checkpoint(path), strict=strict)
