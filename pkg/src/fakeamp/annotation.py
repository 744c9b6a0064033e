"""Human paint-stroke aggregation into attention maps, plus heatmap scoring.

Strokes are rasterized as filled disks, averaged over annotators, smoothed
with a separable anisotropic Gaussian over (x, y, time) and normalized so
every frame sums to one. Frames with no mass fall back to uniform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve1d

DEFAULT_KERNEL_SIGMA = (20.0, 20.0, 6.0)
DEFAULT_BRUSH_RADIUS = 4
FRAME_SUM_TOL = 1e-5


@dataclass
class Stroke:
    frame_index: int
    pixels: list[tuple[int, int]]  # (x, y)


@dataclass
class AnnotationRecord:
    """One annotator's strokes on one video."""

    annotator_id: str
    video_id: str
    strokes: list[Stroke] = field(default_factory=list)
    brush_radius: int = DEFAULT_BRUSH_RADIUS

    def to_json_dict(self, dims: tuple[int, int, int]) -> dict:
        t, h, w = dims
        return {
            "video_id": self.video_id,
            "annotator_id": self.annotator_id,
            "T": t,
            "H": h,
            "W": w,
            "brush_radius": self.brush_radius,
            "strokes": [
                {"frame": s.frame_index, "pixels": [[x, y] for x, y in s.pixels]}
                for s in self.strokes
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> tuple["AnnotationRecord", tuple[int, int, int]]:
        rec = cls(
            annotator_id=str(obj["annotator_id"]),
            video_id=str(obj["video_id"]),
            strokes=[
                Stroke(int(s["frame"]), [(int(p[0]), int(p[1])) for p in s["pixels"]])
                for s in obj["strokes"]
            ],
            brush_radius=int(obj.get("brush_radius", DEFAULT_BRUSH_RADIUS)),
        )
        return rec, (int(obj["T"]), int(obj["H"]), int(obj["W"]))


def load_annotation_json(path) -> tuple[AnnotationRecord, tuple[int, int, int]]:
    with open(path) as fh:
        return AnnotationRecord.from_json_dict(json.load(fh))


def save_annotation_json(record: AnnotationRecord, dims, path):
    import os
    import tempfile

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".json.tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(json.dumps(record.to_json_dict(tuple(dims)), indent=1))
    os.replace(tmp, path)


@dataclass
class AttentionMap3D:
    """T x H x W non-negative maps, each frame normalized to sum to 1."""

    maps: np.ndarray

    def __post_init__(self):
        self.maps = np.asarray(self.maps, dtype=np.float32)
        if self.maps.ndim != 3:
            raise ValueError(f"attention maps must be TxHxW, got shape {self.maps.shape}")

    @property
    def shape(self):
        return self.maps.shape

    def validate(self):
        if np.any(self.maps < 0):
            raise ValueError("attention map has negative entries")
        sums = self.maps.sum(axis=(1, 2))
        bad = np.where(np.abs(sums - 1.0) > FRAME_SUM_TOL)[0]
        if bad.size:
            raise ValueError(
                f"frame {bad[0]} sums to {sums[bad[0]]:.6f}, expected 1 +/- {FRAME_SUM_TOL}"
            )

    @classmethod
    def uniform(cls, t: int, h: int, w: int) -> "AttentionMap3D":
        return cls(np.full((t, h, w), 1.0 / (h * w), dtype=np.float32))


# predicted heatmaps share the representation and invariants of human maps
HeatmapStack = AttentionMap3D


def _disk_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    keep = dx * dx + dy * dy <= r * r
    return np.stack([dx[keep], dy[keep]], axis=1)


def rasterize_record(record: AnnotationRecord, dims: tuple[int, int, int]) -> np.ndarray:
    """Binary T x H x W volume: disks of the record's brush radius, clipped to bounds."""
    t, h, w = dims
    vol = np.zeros((t, h, w), dtype=np.float32)
    offsets = _disk_offsets(record.brush_radius)
    for si, stroke in enumerate(record.strokes):
        if not stroke.pixels:
            raise ValueError(
                f"record annotator={record.annotator_id!r} video={record.video_id!r} "
                f"stroke #{si}: empty pixel list"
            )
        if not 0 <= stroke.frame_index < t:
            raise ValueError(
                f"record annotator={record.annotator_id!r} video={record.video_id!r} "
                f"stroke #{si}: frame {stroke.frame_index} outside [0, {t})"
            )
        for x, y in stroke.pixels:
            if not (0 <= x < w and 0 <= y < h):
                raise ValueError(
                    f"record annotator={record.annotator_id!r} video={record.video_id!r} "
                    f"stroke #{si}: pixel ({x}, {y}) outside {w}x{h} frame"
                )
            xs = np.clip(x + offsets[:, 0], 0, w - 1)
            ys = np.clip(y + offsets[:, 1], 0, h - 1)
            vol[stroke.frame_index, ys, xs] = 1.0
    return vol


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Gaussian taps truncated at 3 sigma, normalized to sum 1."""
    radius = max(1, int(math.ceil(3.0 * sigma)))
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(offs * offs) / (2.0 * sigma * sigma))
    return (k / k.sum()).astype(np.float64)


def smooth_volume(vol: np.ndarray, kernel_sigma=DEFAULT_KERNEL_SIGMA) -> np.ndarray:
    """Separable (x, y, t) Gaussian smoothing with zero padding at the borders."""
    sx, sy, st = kernel_sigma
    out = vol.astype(np.float64)
    out = convolve1d(out, gaussian_kernel_1d(sx), axis=2, mode="constant", cval=0.0)
    out = convolve1d(out, gaussian_kernel_1d(sy), axis=1, mode="constant", cval=0.0)
    out = convolve1d(out, gaussian_kernel_1d(st), axis=0, mode="constant", cval=0.0)
    return out


def normalize_frames(vol: np.ndarray) -> np.ndarray:
    """Normalize each frame to sum 1; zero-mass frames become uniform."""
    t, h, w = vol.shape
    out = vol.astype(np.float64).copy()
    sums = out.sum(axis=(1, 2))
    dead = sums <= 0.0
    out[dead] = 1.0 / (h * w)
    live = ~dead
    out[live] /= sums[live, None, None]
    return out.astype(np.float32)


def aggregate_annotations(records: list[AnnotationRecord], dims: tuple[int, int, int],
                          kernel_sigma=DEFAULT_KERNEL_SIGMA) -> AttentionMap3D:
    """Average annotator stroke volumes, smooth spatiotemporally, normalize per frame."""
    t, h, w = dims
    if records:
        vid = records[0].video_id
        for rec in records:
            if rec.video_id != vid:
                raise ValueError(
                    f"record annotator={rec.annotator_id!r} references video "
                    f"{rec.video_id!r}, expected {vid!r}"
                )
        mean_vol = np.mean([rasterize_record(r, dims) for r in records], axis=0)
    else:
        mean_vol = np.zeros((t, h, w), dtype=np.float32)
    smoothed = smooth_volume(mean_vol, kernel_sigma)
    return AttentionMap3D(normalize_frames(smoothed))


def heatmap_cc(pred: np.ndarray, gt: np.ndarray, with_flag: bool = False):
    """Pearson correlation between two frame maps over flattened pixels.

    Both maps constant is degenerate: the correlation is undefined, so 0 is
    returned (with the flag set when ``with_flag`` is true).
    """
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    g = np.asarray(gt, dtype=np.float64).reshape(-1)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    pc = p - p.mean()
    gc = g - g.mean()
    denom = math.sqrt(float(pc @ pc) * float(gc @ gc))
    if denom == 0.0:
        return (0.0, True) if with_flag else 0.0
    value = float(pc @ gc) / denom
    value = float(np.clip(value, -1.0, 1.0))
    return (value, False) if with_flag else value


def heatmap_kl(pred: np.ndarray, gt: np.ndarray, eps: float = 1e-7) -> float:
    """KL divergence sum(gt * log((gt+eps)/(pred+eps))) after renormalizing both."""
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    g = np.asarray(gt, dtype=np.float64).reshape(-1)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if np.any(p < 0) or np.any(g < 0):
        raise ValueError("heatmap_kl requires non-negative maps")
    if p.sum() > 0:
        p = p / p.sum()
    if g.sum() > 0:
        g = g / g.sum()
    return float(np.sum(g * np.log((g + eps) / (p + eps))))


def center_gaussian_baseline(h: int, w: int, sigma=(20.0, 20.0)) -> np.ndarray:
    """Fixed center-bias map: normalized 2D Gaussian at (W/2, H/2)."""
    if h < 1 or w < 1:
        raise ValueError("map dimensions must be >= 1")
    sx, sy = sigma
    xs = np.arange(w, dtype=np.float64) - w / 2.0
    ys = np.arange(h, dtype=np.float64) - h / 2.0
    gx = np.exp(-(xs * xs) / (2.0 * sx * sx))
    gy = np.exp(-(ys * ys) / (2.0 * sy * sy))
    m = np.outer(gy, gx)
    return (m / m.sum()).astype(np.float32)
