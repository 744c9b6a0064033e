"""Small layer wrappers that register parameters in a ParamStore.

Models are plain objects holding these layers; forward passes are explicit
functions of (input, training) so there is no hidden mode state.
"""

from __future__ import annotations

import numpy as np

from .autodiff import functional as F
from .autodiff.params import ParamStore, he_normal
from .autodiff.tensor import Tensor, mish


class Conv:
    def __init__(self, store: ParamStore, name: str, cin: int, cout: int, k: int = 3,
                 stride: int = 1, pad: int = 1, rng: np.random.Generator | None = None,
                 zero_init: bool = False, bias_init: float = 0.0):
        self.stride, self.pad = stride, pad
        if zero_init:
            w = np.zeros((cout, cin, k, k), dtype=np.float32)
        else:
            w = he_normal(rng, (cout, cin, k, k), fan_in=cin * k * k)
        self.w = store.add(f"{name}.w", w)
        self.b = store.add(f"{name}.b", np.full(cout, bias_init, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


class DepthwiseConv:
    def __init__(self, store: ParamStore, name: str, ch: int, k: int = 3, stride: int = 1,
                 pad: int = 1, rng: np.random.Generator | None = None):
        self.stride, self.pad = stride, pad
        self.w = store.add(f"{name}.w", he_normal(rng, (ch, k, k), fan_in=k * k))
        self.b = store.add(f"{name}.b", np.zeros(ch, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return F.depthwise_conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


class BatchNorm:
    def __init__(self, store: ParamStore, name: str, ch: int):
        self.gamma = store.add(f"{name}.gamma", np.ones(ch, dtype=np.float32))
        self.beta = store.add(f"{name}.beta", np.zeros(ch, dtype=np.float32))
        self.running_mean = store.add(f"{name}.running_mean",
                                      np.zeros(ch, dtype=np.float32), requires_grad=False)
        self.running_var = store.add(f"{name}.running_var",
                                     np.ones(ch, dtype=np.float32), requires_grad=False)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return F.batchnorm2d(x, self.gamma, self.beta,
                             self.running_mean.data, self.running_var.data,
                             training=training)


class ConvBnMish:
    def __init__(self, store, name, cin, cout, k=3, stride=1, pad=1, rng=None):
        self.conv = Conv(store, f"{name}.conv", cin, cout, k, stride, pad, rng)
        self.bn = BatchNorm(store, f"{name}.bn", cout)

    def __call__(self, x, training):
        return mish(self.bn(self.conv(x), training))


class ResBlock:
    """Two 3x3 conv+bn with a skip connection; 1x1 projection when shape changes."""

    def __init__(self, store: ParamStore, name: str, cin: int, cout: int, stride: int = 1,
                 rng: np.random.Generator | None = None, zero_init_last: bool = False):
        self.conv1 = Conv(store, f"{name}.conv1", cin, cout, 3, stride, 1, rng)
        self.bn1 = BatchNorm(store, f"{name}.bn1", cout)
        self.conv2 = Conv(store, f"{name}.conv2", cout, cout, 3, 1, 1, rng,
                          zero_init=zero_init_last)
        self.bn2 = BatchNorm(store, f"{name}.bn2", cout)
        if cin != cout or stride != 1:
            self.proj = Conv(store, f"{name}.proj", cin, cout, 1, stride, 0, rng)
            self.proj_bn = BatchNorm(store, f"{name}.proj_bn", cout)
        else:
            self.proj = None

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        branch = self.bn2(self.conv2(mish(self.bn1(self.conv1(x), training))), training)
        skip = x if self.proj is None else self.proj_bn(self.proj(x), training)
        return mish(skip + branch)


class PlainResBlock:
    """Residual block without normalization: out = x + conv2(mish(conv1(x))).

    With ``zero_init_last`` the block starts as the identity map.
    """

    def __init__(self, store: ParamStore, name: str, ch: int,
                 rng: np.random.Generator | None = None, zero_init_last: bool = False):
        self.conv1 = Conv(store, f"{name}.conv1", ch, ch, 3, 1, 1, rng)
        self.conv2 = Conv(store, f"{name}.conv2", ch, ch, 3, 1, 1, rng,
                          zero_init=zero_init_last)

    def __call__(self, x: Tensor) -> Tensor:
        return x + self.conv2(mish(self.conv1(x)))


def resize_bilinear(maps: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of (..., H, W) arrays with pixel-center alignment."""
    maps = np.asarray(maps, dtype=np.float64)
    h, w = maps.shape[-2:]
    oh, ow = out_hw
    if (h, w) == (oh, ow):
        return maps.copy()
    ys = (np.arange(oh) + 0.5) * (h / oh) - 0.5
    xs = (np.arange(ow) + 0.5) * (w / ow) - 0.5
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(int)
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)
    wx = np.clip(xs - x0, 0.0, 1.0)
    top = maps[..., y0, :][..., :, x0] * (1 - wx) + maps[..., y0, :][..., :, x1] * wx
    bot = maps[..., y1, :][..., :, x0] * (1 - wx) + maps[..., y1, :][..., :, x1] * wx
    return top * (1 - wy[:, None]) + bot * wy[:, None]


def scale_to_mean_one(maps: np.ndarray) -> np.ndarray:
    """Rescale each (H, W) frame of a (T, H, W) stack to mean 1.

    All-zero frames stay zero: rescaling cannot create mass, and a zero map
    must keep gating everything off.
    """
    maps = np.asarray(maps, dtype=np.float64)
    sums = maps.sum(axis=(-1, -2), keepdims=True)
    n = maps.shape[-1] * maps.shape[-2]
    safe = np.where(sums > 0, sums, 1.0)
    return maps * (n / safe)
