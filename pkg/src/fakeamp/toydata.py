"""Procedural toy deepfake dataset.

Real clips are drifting textured scenes. Fake clips add one localized
artifact: a flickering patch or a periodically warped region. Ground-truth
attention maps come from the same aggregation path as human annotations,
applied to the artifact's pixel footprint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .annotation import AnnotationRecord, AttentionMap3D, Stroke, aggregate_annotations
from .layers import resize_bilinear

ARTIFACT_KINDS = ("patch_flicker", "local_warp")


@dataclass
class ToyDatasetSpec:
    n_real: int = 100
    n_fake: int = 100
    t: int = 16
    h: int = 64
    w: int = 64
    artifact_kinds: tuple[str, ...] = ARTIFACT_KINDS
    seed: int = 0

    def __post_init__(self):
        if self.n_real < 1 or self.n_fake < 1:
            raise ValueError("need at least one real and one fake video")
        if self.h % 16 or self.w % 16:
            raise ValueError(f"H and W must be divisible by 16, got {self.h}x{self.w}")
        for k in self.artifact_kinds:
            if k not in ARTIFACT_KINDS:
                raise ValueError(f"unknown artifact kind {k!r}; valid: {ARTIFACT_KINDS}")


@dataclass
class ToyVideo:
    clip: np.ndarray                     # (T, 3, H, W) in [0, 1]
    label: int                           # 0 real, 1 fake
    gt_map: Optional[AttentionMap3D]     # fakes only
    footprint: Optional[np.ndarray]      # (H, W) bool mask of artifact pixels
    artifact_kind: Optional[str]


@dataclass
class ToyDataset:
    spec: ToyDatasetSpec
    videos: list[ToyVideo] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return np.asarray([v.label for v in self.videos])

    def indices_by_label(self) -> tuple[np.ndarray, np.ndarray]:
        labels = self.labels
        return np.where(labels == 0)[0], np.where(labels == 1)[0]


def _smooth_texture(rng: np.random.Generator, h: int, w: int, scale: int = 8) -> np.ndarray:
    coarse = rng.random((max(2, h // scale) + 1, max(2, w // scale) + 1))
    fine = resize_bilinear(coarse, (h, w))
    lo, hi = fine.min(), fine.max()
    return (fine - lo) / (hi - lo + 1e-9)


def _render_drifting_scene(rng: np.random.Generator, t: int, h: int, w: int) -> np.ndarray:
    """Textured canvas drifting at subpixel speed; crops are bilinear."""
    margin = 6
    canvas = np.stack([0.2 + 0.6 * _smooth_texture(rng, h + 2 * margin, w + 2 * margin)
                       for _ in range(3)])
    tint = rng.uniform(-0.05, 0.05, size=(3, 1, 1))
    canvas = np.clip(canvas + tint, 0.0, 1.0)
    angle = rng.uniform(0, 2 * np.pi)
    speed = rng.uniform(0.2, 0.6)
    dy, dx = speed * np.sin(angle), speed * np.cos(angle)
    frames = []
    for i in range(t):
        oy = margin + i * dy - (t - 1) * dy / 2
        ox = margin + i * dx - (t - 1) * dx / 2
        iy, ix = int(np.floor(oy)), int(np.floor(ox))
        fy, fx = oy - iy, ox - ix
        win = canvas[:, iy:iy + h + 1, ix:ix + w + 1]
        frame = ((1 - fy) * (1 - fx) * win[:, :h, :w]
                 + (1 - fy) * fx * win[:, :h, 1:w + 1]
                 + fy * (1 - fx) * win[:, 1:h + 1, :w]
                 + fy * fx * win[:, 1:h + 1, 1:w + 1])
        frames.append(frame)
    return np.clip(np.stack(frames), 0.0, 1.0).astype(np.float32)


def _artifact_region(rng: np.random.Generator, h: int, w: int) -> tuple[np.ndarray, tuple]:
    """Disk mask with a ~1 px edge, placed in the outer ring of the frame.

    Keeping artifacts away from the center maximizes the contrast between
    ground-truth-aligned attention and a fixed center bias.
    """
    radius = rng.uniform(min(h, w) * 0.13, min(h, w) * 0.22)
    min_dist = 0.25 * min(h, w)
    while True:
        cy = rng.uniform(radius + 2, h - radius - 2)
        cx = rng.uniform(radius + 2, w - radius - 2)
        if np.hypot(cy - h / 2, cx - w / 2) >= min_dist:
            break
    ys, xs = np.mgrid[0:h, 0:w]
    d = np.sqrt((ys - cy) ** 2 + (xs - cx) ** 2)
    mask = np.clip((radius - d) / 1.0 + 0.5, 0.0, 1.0)
    return mask.astype(np.float32), (cy, cx, radius)


def _apply_patch_flicker(clip: np.ndarray, mask: np.ndarray,
                         rng: np.random.Generator) -> np.ndarray:
    """Periodically modulated brightening; never fully off, so every frame is tainted."""
    t = clip.shape[0]
    period = rng.uniform(3.0, 5.0)
    phase = rng.uniform(0, 2 * np.pi)
    amp = rng.uniform(0.35, 0.5)
    sign = rng.choice([-1.0, 1.0])
    out = clip.copy()
    for i in range(t):
        wave = 0.4 + 0.6 * (1 + np.sin(2 * np.pi * i / period + phase)) / 2
        gain = 1.0 + sign * amp * wave
        out[i] = clip[i] * (1 + (gain - 1) * mask[None])
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _apply_local_warp(clip: np.ndarray, mask: np.ndarray, center: tuple,
                      rng: np.random.Generator) -> np.ndarray:
    """Periodic sinusoidal displacement inside the masked region."""
    t, _, h, w = clip.shape
    cy, cx, _ = center
    period = rng.uniform(3.0, 5.0)
    phase = rng.uniform(0, 2 * np.pi)
    amp = rng.uniform(2.0, 3.2)
    angle = rng.uniform(0, 2 * np.pi)
    uy, ux = np.sin(angle), np.cos(angle)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    out = clip.copy()
    for i in range(t):
        wave = 0.4 + 0.6 * (1 + np.sin(2 * np.pi * i / period + phase)) / 2
        shift = amp * wave
        sy = ys - shift * uy * mask
        sx = xs - shift * ux * mask
        y0 = np.clip(np.floor(sy).astype(int), 0, h - 2)
        x0 = np.clip(np.floor(sx).astype(int), 0, w - 2)
        fy = np.clip(sy - y0, 0.0, 1.0)
        fx = np.clip(sx - x0, 0.0, 1.0)
        for ch in range(clip.shape[1]):
            plane = clip[i, ch]
            warped = ((1 - fy) * (1 - fx) * plane[y0, x0]
                      + (1 - fy) * fx * plane[y0, x0 + 1]
                      + fy * (1 - fx) * plane[y0 + 1, x0]
                      + fy * fx * plane[y0 + 1, x0 + 1])
            out[i, ch] = np.where(mask > 0.01, warped, plane)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def render_fake(clip: np.ndarray, kind: str, rng: np.random.Generator
                ) -> tuple[np.ndarray, np.ndarray]:
    """Overlay one artifact on a real clip; returns (fake clip, footprint mask)."""
    h, w = clip.shape[2], clip.shape[3]
    mask, center = _artifact_region(rng, h, w)
    if kind == "patch_flicker":
        fake = _apply_patch_flicker(clip, mask, rng)
    else:
        fake = _apply_local_warp(clip, mask, center, rng)
    return fake, mask > 0.5


def footprint_ground_truth(footprint: np.ndarray, t: int,
                           kernel_sigma=(6.0, 6.0, 3.0)) -> AttentionMap3D:
    """Aggregate the artifact's pixel footprint exactly like human strokes.

    A tighter kernel than the human default keeps the map informative at toy
    resolution (64x64 vs the full-scale 360x360 frames).
    """
    ys, xs = np.where(footprint)
    step = max(1, ys.size // 400)  # subsample dense footprints; smoothing fills gaps
    pixels = [(int(x), int(y)) for y, x in zip(ys[::step], xs[::step])]
    rec = AnnotationRecord(
        annotator_id="synthetic", video_id="synthetic",
        strokes=[Stroke(i, pixels) for i in range(t)], brush_radius=1,
    )
    return aggregate_annotations([rec], (t, footprint.shape[0], footprint.shape[1]),
                                 kernel_sigma=kernel_sigma)


def save_dataset(ds: ToyDataset, root):
    """clips/NNNNN.cari + maps/NNNNN.cari (fakes) + labels.csv."""
    import csv
    from pathlib import Path

    from .clipio import save_clip, save_heatmaps

    root = Path(root)
    (root / "clips").mkdir(parents=True, exist_ok=True)
    (root / "maps").mkdir(parents=True, exist_ok=True)
    with open(root / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "label", "artifact_kind"])
        for i, v in enumerate(ds.videos):
            save_clip(v.clip, root / "clips" / f"{i:05d}.cari")
            if v.gt_map is not None:
                save_heatmaps(v.gt_map.maps, root / "maps" / f"{i:05d}.cari")
            w.writerow([i, v.label, v.artifact_kind or ""])


def load_dataset(root) -> ToyDataset:
    import csv
    from pathlib import Path

    from .clipio import load_clip, load_heatmaps

    root = Path(root)
    videos = []
    with open(root / "labels.csv") as fh:
        for row in csv.DictReader(fh):
            i = int(row["index"])
            clip = load_clip(root / "clips" / f"{i:05d}.cari")
            map_path = root / "maps" / f"{i:05d}.cari"
            gt = AttentionMap3D(load_heatmaps(map_path)) if map_path.exists() else None
            videos.append(ToyVideo(clip, int(row["label"]), gt, None,
                                   row["artifact_kind"] or None))
    t, _, h, w = videos[0].clip.shape
    spec = ToyDatasetSpec(
        n_real=max(1, sum(1 for v in videos if v.label == 0)),
        n_fake=max(1, sum(1 for v in videos if v.label == 1)),
        t=t, h=h, w=w)
    return ToyDataset(spec=spec, videos=videos)


def generate_toy_dataset(spec: ToyDatasetSpec) -> ToyDataset:
    """Deterministic per seed: same spec, same bytes."""
    root = np.random.SeedSequence(spec.seed)
    real_seq, fake_seq = root.spawn(2)
    ds = ToyDataset(spec=spec)

    for child in real_seq.spawn(spec.n_real):
        rng = np.random.default_rng(child)
        clip = _render_drifting_scene(rng, spec.t, spec.h, spec.w)
        ds.videos.append(ToyVideo(clip, 0, None, None, None))

    for i, child in enumerate(fake_seq.spawn(spec.n_fake)):
        rng = np.random.default_rng(child)
        clip = _render_drifting_scene(rng, spec.t, spec.h, spec.w)
        kind = spec.artifact_kinds[i % len(spec.artifact_kinds)]
        fake, footprint = render_fake(clip, kind, rng)
        gt = footprint_ground_truth(footprint, spec.t)
        ds.videos.append(ToyVideo(fake, 1, gt, footprint, kind))
    return ds
