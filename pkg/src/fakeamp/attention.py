"""Encoder-decoder that predicts per-frame artifact heatmaps.

The encoder is a stack of depthwise-separable conv stages (stride 2 each);
the decoder is 6 residual blocks with nearest-neighbor upsampling stages in
between until the input resolution is restored. Output heatmaps go through
softplus and per-frame normalization, so they always sum to 1 by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .annotation import HeatmapStack
from .autodiff import functional as F
from .autodiff.params import ParamStore
from .autodiff.tensor import Tensor, log, mish, no_grad, softplus
from .layers import BatchNorm, Conv, ConvBnMish, DepthwiseConv, ResBlock

DECODER_BLOCKS = 6
KL_EPS = 1e-7
CC_EPS = 1e-20  # guards the variance product; must stay far below real map variances


@dataclass
class EncoderConfig:
    stage_channels: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
    block_kind: str = "depthwise-separable"

    @property
    def downsample_factor(self) -> int:
        return 2 ** len(self.stage_channels)

    @property
    def code_channels(self) -> int:
        return self.stage_channels[-1]


@dataclass
class CodeVolume:
    """Per-frame spatial codes, T x C_e x h x w."""

    codes: np.ndarray

    @property
    def shape(self):
        return self.codes.shape


class _EncoderStage:
    def __init__(self, store, name, cin, cout, rng):
        self.dw = DepthwiseConv(store, f"{name}.dw", cin, 3, stride=2, pad=1, rng=rng)
        self.dw_bn = BatchNorm(store, f"{name}.dw_bn", cin)
        self.pw = Conv(store, f"{name}.pw", cin, cout, k=1, stride=1, pad=0, rng=rng)
        self.pw_bn = BatchNorm(store, f"{name}.pw_bn", cout)

    def __call__(self, x, training):
        x = mish(self.dw_bn(self.dw(x), training))
        return mish(self.pw_bn(self.pw(x), training))


class ArtifactAttentionNet:
    """Heatmap predictor; also the code source for caricature generation."""

    def __init__(self, store: ParamStore, cfg: EncoderConfig | None = None,
                 rng: np.random.Generator | None = None, prefix: str = "attn"):
        self.cfg = cfg or EncoderConfig()
        self.store = store
        rng = rng or np.random.default_rng(0)

        self.stages = []
        cin = 3
        for i, cout in enumerate(self.cfg.stage_channels):
            self.stages.append(_EncoderStage(store, f"{prefix}.enc{i}", cin, cout, rng))
            cin = cout

        n_up = len(self.cfg.stage_channels)
        chans = [self.cfg.code_channels]
        for i in range(DECODER_BLOCKS):
            nxt = max(chans[-1] // 2, 8) if i < n_up else chans[-1]
            chans.append(nxt)
        self.dec_blocks = []
        for i in range(DECODER_BLOCKS):
            block = ResBlock(store, f"{prefix}.dec{i}", chans[i], chans[i], rng=rng)
            if i < n_up:
                up_conv = ConvBnMish(store, f"{prefix}.up{i}", chans[i], chans[i + 1], rng=rng)
            else:
                up_conv = None
            self.dec_blocks.append((block, up_conv))
        self.head = Conv(store, f"{prefix}.head", chans[DECODER_BLOCKS], 1, k=3,
                         stride=1, pad=1, rng=rng)

    # in-graph passes ---------------------------------------------------
    def encode_t(self, frames: Tensor, training: bool) -> Tensor:
        h, w = frames.shape[2], frames.shape[3]
        f = self.cfg.downsample_factor
        if h % f or w % f:
            raise ValueError(
                f"frame size {h}x{w} not divisible by downsample factor {f}; "
                f"pad the clip to a multiple of {f} first"
            )
        x = frames
        for stage in self.stages:
            x = stage(x, training)
        return x

    def decode_t(self, codes: Tensor, training: bool) -> Tensor:
        x = codes
        for block, up_conv in self.dec_blocks:
            x = block(x, training)
            if up_conv is not None:
                x = F.nearest_upsample(x, 2)
                x = up_conv(x, training)
        raw = softplus(self.head(x))
        total = raw.sum(axis=(1, 2, 3), keepdims=True)
        normed = raw / total
        n, _, h, w = normed.shape
        return normed.reshape(n, h, w)

    # public data-level ops ---------------------------------------------
    def encode(self, clip: np.ndarray, training: bool = False) -> CodeVolume:
        with no_grad():
            codes = self.encode_t(Tensor(np.asarray(clip, dtype=np.float32)), training)
        return CodeVolume(codes.data)

    def predict_heatmaps(self, clip: np.ndarray) -> HeatmapStack:
        with no_grad():
            codes = self.encode_t(Tensor(np.asarray(clip, dtype=np.float32)), False)
            maps = self.decode_t(codes, False)
        return HeatmapStack(maps.data)


def attention_supervision_loss(pred: Tensor, gt: np.ndarray) -> Tensor:
    """Mean over frames of (1 - CC) + KL + L1 between predicted and target maps.

    ``pred`` is an in-graph (T, H, W) stack of per-frame-normalized heatmaps;
    ``gt`` a constant stack with the same normalization. L1 is summed over
    pixels within a frame, matching the scale of the KL term.
    """
    gt = np.asarray(gt, dtype=np.float32)
    if tuple(pred.shape) != gt.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs gt {gt.shape}")
    t = pred.shape[0]
    p = pred.reshape(t, -1)
    g = gt.reshape(t, -1)

    pc = p - p.mean(axis=1, keepdims=True)
    gc = Tensor(g - g.mean(axis=1, keepdims=True))
    num = (pc * gc).sum(axis=1)
    den = ((pc * pc).sum(axis=1) * Tensor((gc.data ** 2).sum(axis=1)) + CC_EPS) ** 0.5
    cc = num / den

    const_term = np.sum(g * np.log(g + KL_EPS), axis=1)
    kl = Tensor(const_term) - (Tensor(g) * log(p + KL_EPS)).sum(axis=1)

    l1 = (p - Tensor(g)).abs().sum(axis=1)

    return ((1.0 - cc) + kl + l1).mean()
