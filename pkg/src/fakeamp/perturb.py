"""Photometric perturbation suite: contrast, noise, blur, pixelation at 5 severities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

PERTURBATION_KINDS = ("contrast", "gaussian_noise", "gaussian_blur", "pixelation")

# severity ladders, index 0 = severity 1
CONTRAST_FACTORS = (0.85, 0.7, 0.55, 0.4, 0.25)
NOISE_SIGMAS = (0.02, 0.04, 0.06, 0.08, 0.1)
BLUR_SIGMAS = (0.5, 1.0, 1.5, 2.0, 2.5)
PIXELATION_BLOCKS = (2, 4, 8, 16, 32)


@dataclass
class PerturbationSpec:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation {self.kind!r}; valid: {PERTURBATION_KINDS}")
        if not 1 <= self.severity <= 5:
            raise ValueError(f"severity must be 1..5, got {self.severity}")


def _pixelate_frame(frame: np.ndarray, block: int) -> np.ndarray:
    c, h, w = frame.shape
    bh, bw = min(block, h), min(block, w)
    ph = (bh - h % bh) % bh
    pw = (bw - w % bw) % bw
    padded = np.pad(frame, ((0, 0), (0, ph), (0, pw)), mode="edge")
    hh, ww = padded.shape[1] // bh, padded.shape[2] // bw
    means = padded.reshape(c, hh, bh, ww, bw).mean(axis=(2, 4))
    out = means.repeat(bh, axis=1).repeat(bw, axis=2)
    return out[:, :h, :w]


def perturb(clip: np.ndarray, spec: PerturbationSpec,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply one perturbation to a (T, C, H, W) clip; output clamped to [0, 1].

    Gaussian noise uses ``rng`` (or a deterministic default seeded from the
    severity) so results are reproducible.
    """
    clip = np.asarray(clip, dtype=np.float32)
    i = spec.severity - 1
    if spec.kind == "contrast":
        out = (clip - 0.5) * CONTRAST_FACTORS[i] + 0.5
    elif spec.kind == "gaussian_noise":
        rng = rng or np.random.default_rng(1000 + spec.severity)
        out = clip + rng.normal(0.0, NOISE_SIGMAS[i], size=clip.shape)
    elif spec.kind == "gaussian_blur":
        out = np.stack([
            np.stack([gaussian_filter(ch, BLUR_SIGMAS[i], mode="nearest")
                      for ch in frame])
            for frame in clip
        ])
    else:  # pixelation
        out = np.stack([_pixelate_frame(f, PIXELATION_BLOCKS[i]) for f in clip])
    return np.clip(out, 0.0, 1.0).astype(np.float32)
