"""Clip and heatmap persistence: the CARI binary container and PNG frame dirs.

CARI layout (little-endian): magic "CARI", version u32, T C H W u32, then
T*C*H*W float32 values in frame-major order. Clips store values in [0, 1];
heatmap stacks reuse the container with C=1 (value range unchecked).
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"CARI"
VERSION = 1

_FRAME_RE = re.compile(r"(\d+)\.png$")


class ClipFormatError(ValueError):
    pass


def save_clip(clip: np.ndarray, path):
    """Write a (T, C, H, W) float32 volume; atomic (temp file + rename)."""
    clip = np.ascontiguousarray(np.asarray(clip, dtype="<f4"))
    if clip.ndim != 4:
        raise ClipFormatError(f"clip must be TxCxHxW, got shape {clip.shape}")
    t, c, h, w = clip.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<5I", VERSION, t, c, h, w))
            fh.write(clip.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_clip(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise ClipFormatError(
            f"bad magic {blob[:4]!r} at byte offset 0, expected {MAGIC!r}"
        )
    if len(blob) < 24:
        raise ClipFormatError(
            f"truncated header: need 24 bytes, file has {len(blob)} (offset {len(blob)})"
        )
    version, t, c, h, w = struct.unpack("<5I", blob[4:24])
    if version != VERSION:
        raise ClipFormatError(f"unsupported container version {version}")
    expected = 24 + t * c * h * w * 4
    if len(blob) != expected:
        raise ClipFormatError(
            f"payload length mismatch at byte offset {min(len(blob), expected)}: "
            f"expected {expected} bytes total, file has {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=24)
    return data.reshape(t, c, h, w).astype(np.float32)


def save_heatmaps(maps: np.ndarray, path):
    maps = np.asarray(maps, dtype=np.float32)
    save_clip(maps[:, None, :, :], path)


def load_heatmaps(path) -> np.ndarray:
    vol = load_clip(path)
    if vol.shape[1] != 1:
        raise ClipFormatError(f"heatmap container must have C=1, got C={vol.shape[1]}")
    return vol[:, 0]


def load_png_dir(path) -> np.ndarray:
    """Directory of numbered PNG frames -> (T, 3, H, W) clip with values pixel/255."""
    path = Path(path)
    frames = []
    for p in sorted(path.iterdir()):
        m = _FRAME_RE.search(p.name)
        if m:
            frames.append((int(m.group(1)), p))
    if not frames:
        raise ClipFormatError(f"no numbered .png frames found in {path}")
    frames.sort()
    arrays = []
    for _, p in frames:
        img = np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0
        arrays.append(img.transpose(2, 0, 1))
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise ClipFormatError(f"inconsistent frame sizes in {path}: {sorted(shapes)}")
    return np.stack(arrays)


def save_png_dir(clip: np.ndarray, path):
    clip = np.asarray(clip, dtype=np.float32)
    if clip.ndim != 4 or clip.shape[1] not in (1, 3):
        raise ClipFormatError(f"expected TxCxHxW with C in (1,3), got {clip.shape}")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(clip):
        arr = np.clip(frame, 0.0, 1.0)
        if arr.shape[0] == 1:
            arr = np.repeat(arr, 3, axis=0)
        img = Image.fromarray((arr.transpose(1, 2, 0) * 255.0).round().astype(np.uint8))
        target = path / f"{i:05d}.png"
        fd, tmp = tempfile.mkstemp(dir=path, suffix=".png.tmp")
        os.close(fd)
        img.save(tmp, format="PNG")
        os.replace(tmp, target)


def load_any_clip(path) -> np.ndarray:
    """CARI file or PNG directory, by inspection."""
    p = Path(path)
    if p.is_dir():
        return load_png_dir(p)
    return load_clip(p)
