"""Real/fake video classifier with artifact-map-modulated self-attention.

The stem is three 3x3 convolutions (strides 2, 1, 1, each with batchnorm and
Mish) followed by 3x3 max pooling with stride 2. A sequence of attention
blocks follows: a residual block and then self-attention whose keys are
re-weighted by the artifact attention map. Per-frame logits are averaged
into a video score (consensus) and thresholded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .annotation import center_gaussian_baseline
from .attention import ArtifactAttentionNet, EncoderConfig
from .autodiff import functional as F
from .autodiff.params import ParamStore, normal
from .autodiff.tensor import Tensor, no_grad, sigmoid, softmax
from .layers import ConvBnMish, ResBlock, resize_bilinear, scale_to_mean_one

ATTENTION_MODES = ("full", "no_attention", "unmodulated", "fixed_gaussian")


@dataclass
class ClassifierConfig:
    depth: int = 4
    stage_channels: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
    attention_mode: str = "full"
    threshold: float = 0.5

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.attention_mode not in ATTENTION_MODES:
            raise ValueError(
                f"unknown attention_mode {self.attention_mode!r}; valid: {ATTENTION_MODES}"
            )


@dataclass
class DetectionResult:
    frame_scores: np.ndarray
    video_score: float
    label: str  # "real" | "fake"


class AttentionBlockParams:
    """Query/key/value projections plus the learnable residual scale gamma (init 0)."""

    def __init__(self, store: ParamStore, name: str, channels: int,
                 rng: np.random.Generator):
        if channels % 4:
            raise ValueError(f"attention block needs channels divisible by 4, got {channels}")
        cbar = channels // 4
        std = 1.0 / np.sqrt(channels)
        self.w_q = store.add(f"{name}.w_q", normal(rng, (cbar, channels), std))
        self.w_k = store.add(f"{name}.w_k", normal(rng, (cbar, channels), std))
        self.w_v = store.add(f"{name}.w_v", normal(rng, (channels, channels), std))
        self.gamma = store.add(f"{name}.gamma", np.zeros((), dtype=np.float32))


def modulated_self_attention(x: Tensor, a_feat: Optional[np.ndarray],
                             p: AttentionBlockParams) -> Tensor:
    """Self-attention over spatial positions with keys re-weighted by the map.

    ``x`` is (N, C, h, w) (or (C, h, w) for a single frame); ``a_feat`` is a
    non-negative (N, h, w) map or None for unmodulated attention. Each query
    position aggregates values over key positions; the attended residual is
    scaled by gamma and added to the input.
    """
    single = x.ndim == 3
    if single:
        x = x.reshape(1, *x.shape)
    n, c, h, w = x.shape
    if c % 4:
        raise ValueError(f"channels {c} not divisible by 4 (reduced dim is C/4)")
    if a_feat is not None:
        a_feat = np.asarray(a_feat, dtype=np.float32)
        if a_feat.ndim == 2:
            a_feat = a_feat[None]
        if np.any(a_feat < 0):
            raise ValueError("attention map must be non-negative")
        if a_feat.shape != (n, h, w):
            raise ValueError(f"map shape {a_feat.shape} does not match frames ({n},{h},{w})")

    xf = x.reshape(n, c, h * w)
    q = p.w_q @ xf
    k = p.w_k @ xf
    if a_feat is not None:
        k = k * Tensor(a_feat.reshape(n, 1, h * w))
    affinity = softmax(q.transpose((0, 2, 1)) @ k, axis=-1)  # (N, P, P), rows = queries
    v = p.w_v @ xf
    y = v @ affinity.transpose((0, 2, 1))
    out = p.gamma * y + xf
    out = out.reshape(n, c, h, w)
    return out.reshape(c, h, w) if single else out


class ClassifierNet:
    def __init__(self, store: ParamStore, cfg: ClassifierConfig,
                 rng: np.random.Generator, prefix: str = "clf"):
        self.cfg = cfg
        chans = cfg.stage_channels
        c0 = chans[0]
        self.stem_convs = [
            ConvBnMish(store, f"{prefix}.stem0", 3, c0, stride=2, rng=rng),
            ConvBnMish(store, f"{prefix}.stem1", c0, c0, stride=1, rng=rng),
            ConvBnMish(store, f"{prefix}.stem2", c0, c0, stride=1, rng=rng),
        ]

        # distribute depth across stages; the first block of each later stage
        # downsamples and widens
        stage_of_block = [min(i * len(chans) // cfg.depth, len(chans) - 1)
                          for i in range(cfg.depth)]
        self.blocks = []
        cin = c0
        for i in range(cfg.depth):
            cout = chans[stage_of_block[i]]
            stride = 2 if (cout != cin and i > 0) else 1
            res = ResBlock(store, f"{prefix}.block{i}.res", cin, cout, stride, rng)
            attn = (AttentionBlockParams(store, f"{prefix}.block{i}.attn", cout, rng)
                    if cfg.attention_mode != "no_attention" else None)
            self.blocks.append((res, attn))
            cin = cout
        self.out_channels = cin
        self.head_w = store.add(f"{prefix}.head.w", normal(rng, (cin, 1), 1.0 / np.sqrt(cin)))
        self.head_b = store.add(f"{prefix}.head.b", np.zeros(1, dtype=np.float32))

    def stem_t(self, frames: Tensor, training: bool) -> Tensor:
        if frames.shape[2] < 8 or frames.shape[3] < 8:
            raise ValueError(f"stem needs frames of at least 8x8, got "
                             f"{frames.shape[2]}x{frames.shape[3]}")
        x = frames
        for conv in self.stem_convs:
            x = conv(x, training)
        return F.maxpool2d(x, kernel=3, stride=2, pad=1)

    def _block_map(self, maps: Optional[np.ndarray], clip_hw: tuple[int, int],
                   feat_hw: tuple[int, int], n: int) -> Optional[np.ndarray]:
        """Resolve the per-block modulation map for the configured mode."""
        mode = self.cfg.attention_mode
        if mode in ("no_attention", "unmodulated"):
            return None
        if mode == "fixed_gaussian":
            base = center_gaussian_baseline(*clip_hw)
            feat = resize_bilinear(base[None], feat_hw)
            return np.repeat(scale_to_mean_one(feat), n, axis=0).astype(np.float32)
        if maps is None:
            raise ValueError("full attention mode needs artifact maps")
        feat = resize_bilinear(maps, feat_hw)
        return scale_to_mean_one(feat).astype(np.float32)

    def forward_logits(self, frames: Tensor, maps: Optional[np.ndarray],
                       training: bool) -> Tensor:
        """Per-frame binary logits, shape (T,). ``maps`` is a (T, H, W) stack."""
        clip_hw = (frames.shape[2], frames.shape[3])
        n = frames.shape[0]
        x = self.stem_t(frames, training)
        for res, attn in self.blocks:
            x = res(x, training)
            if attn is not None:
                a = self._block_map(maps, clip_hw, (x.shape[2], x.shape[3]), n)
                x = modulated_self_attention(x, a, attn)
        pooled = F.global_avg_pool(x)
        logits = pooled @ self.head_w + self.head_b
        return logits.reshape(n)


class DetectorPipeline:
    """Classifier plus (in full mode) the artifact-attention module, one ParamStore."""

    def __init__(self, clf_cfg: ClassifierConfig | None = None,
                 enc_cfg: EncoderConfig | None = None, seed: int = 0):
        self.clf_cfg = clf_cfg or ClassifierConfig()
        self.enc_cfg = enc_cfg or EncoderConfig()
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        self.attention = (ArtifactAttentionNet(self.store, self.enc_cfg, rng)
                          if self.clf_cfg.attention_mode == "full" else None)
        self.classifier = ClassifierNet(self.store, self.clf_cfg, rng)

    def predicted_maps(self, clip: np.ndarray) -> np.ndarray:
        if self.attention is None:
            raise ValueError(f"mode {self.clf_cfg.attention_mode!r} has no attention module")
        return self.attention.predict_heatmaps(clip).maps

    def frame_scores(self, clip: np.ndarray, maps: Optional[np.ndarray] = None) -> np.ndarray:
        clip = np.asarray(clip, dtype=np.float32)
        if self.clf_cfg.attention_mode == "full" and maps is None:
            maps = self.predicted_maps(clip)
        with no_grad():
            logits = self.classifier.forward_logits(Tensor(clip), maps, training=False)
            return sigmoid(logits).data.copy()


def classify_video(pipeline: DetectorPipeline, clip: np.ndarray,
                   maps: Optional[np.ndarray] = None) -> DetectionResult:
    """Per-frame scores, mean consensus, thresholded label (ties go to real)."""
    clip = np.asarray(clip, dtype=np.float32)
    if clip.shape[0] == 0:
        raise ValueError("cannot classify an empty clip (T == 0)")
    scores = pipeline.frame_scores(clip, maps)
    video_score = float(scores.mean())
    label = "fake" if video_score > pipeline.clf_cfg.threshold else "real"
    return DetectionResult(frame_scores=scores, video_score=video_score, label=label)
