"""Convolution, pooling, normalization and loss ops for the tensor engine.

All spatial ops take NCHW inputs. Convolutions run through im2col plus a
single BLAS matmul; backward scatters through col2im.
"""

from __future__ import annotations

import numpy as np

from .tensor import Function, Tensor, log, sigmoid  # noqa: F401  (sigmoid re-exported)


def _conv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _pad_spatial(x: np.ndarray, pad: int, value: float = 0.0) -> np.ndarray:
    if pad == 0:
        return x
    n, c, h, w = x.shape
    out = np.full((n, c, h + 2 * pad, w + 2 * pad), value, dtype=x.dtype)
    out[:, :, pad:pad + h, pad:pad + w] = x
    return out


def _windows(xpad: np.ndarray, k: int, stride: int) -> np.ndarray:
    """(N,C,Hp,Wp) -> strided view (N,C,oh,ow,k,k)."""
    w = np.lib.stride_tricks.sliding_window_view(xpad, (k, k), axis=(2, 3))
    return w[:, :, ::stride, ::stride, :, :]


def _im2col(xpad: np.ndarray, k: int, stride: int):
    win = _windows(xpad, k, stride)
    n, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, oh * ow)
    return np.ascontiguousarray(cols), oh, ow


def _col2im(gcols: np.ndarray, xpad_shape, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    n, c, hp, wp = xpad_shape
    g = gcols.reshape(n, c, k, k, oh, ow)
    gx = np.zeros(xpad_shape, dtype=gcols.dtype)
    for i in range(k):
        for j in range(k):
            gx[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += g[:, :, i, j]
    return gx


def _check_conv_shapes(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int):
    if x.ndim != 4:
        raise ValueError(f"conv2d input must be NCHW, got {x.ndim} axes")
    if w.ndim != 4:
        raise ValueError(f"conv2d weight must be (out,in,k,k), got {w.ndim} axes")
    o, cin, kh, kw = w.shape
    if kh != kw:
        raise ValueError(f"conv2d kernel must be square, got {kh}x{kw}")
    if x.shape[1] != cin:
        raise ValueError(
            f"conv2d channel mismatch on input axis 1: input has {x.shape[1]} channels, "
            f"weight expects {cin}"
        )
    if b.shape != (o,):
        raise ValueError(
            f"conv2d bias axis 0 must match {o} output channels, got shape {b.shape}"
        )
    if kh > x.shape[2] + 2 * pad or kw > x.shape[3] + 2 * pad:
        raise ValueError(
            f"conv2d kernel {kh}x{kw} exceeds padded input "
            f"{x.shape[2] + 2 * pad}x{x.shape[3] + 2 * pad} on the spatial axes"
        )


class Conv2d(Function):
    def forward(self, x, w, b, stride, pad):
        _check_conv_shapes(x, w, b, pad)
        o, cin, k, _ = w.shape
        xpad = _pad_spatial(x, pad)
        cols, oh, ow = _im2col(xpad, k, stride)
        wmat = w.reshape(o, cin * k * k)
        out = np.matmul(wmat, cols) + b[:, None]
        self.saved = (cols, wmat, x.shape, xpad.shape, oh, ow)
        return out.reshape(x.shape[0], o, oh, ow)

    def backward(self, grad):
        cols, wmat, xshape, xpad_shape, oh, ow = self.saved
        stride, pad = self.kwargs["stride"], self.kwargs["pad"]
        o = wmat.shape[0]
        k = self.inputs[1].shape[2]
        cin = self.inputs[1].shape[1]
        n = grad.shape[0]
        gmat = grad.reshape(n, o, oh * ow)
        gb = gmat.sum(axis=(0, 2))
        # one GEMM over the flattened batch instead of N batched matmuls + sum
        gflat = np.ascontiguousarray(gmat.transpose(1, 0, 2)).reshape(o, -1)
        cflat = np.ascontiguousarray(cols.transpose(1, 0, 2)).reshape(cols.shape[1], -1)
        gw = (gflat @ cflat.T).reshape(o, cin, k, k)
        gcols = np.matmul(wmat.T, gmat)
        gxpad = _col2im(gcols, xpad_shape, k, stride, oh, ow)
        if pad:
            gx = gxpad[:, :, pad:pad + xshape[2], pad:pad + xshape[3]]
        else:
            gx = gxpad
        return gx, gw, gb


class DepthwiseConv2d(Function):
    """Per-channel 3x3-style convolution: weight (C, k, k), one filter per channel."""

    def forward(self, x, w, b, stride, pad):
        if x.shape[1] != w.shape[0]:
            raise ValueError(
                f"depthwise_conv2d channel mismatch on axis 1: input has {x.shape[1]}, "
                f"weight has {w.shape[0]}"
            )
        k = w.shape[1]
        xpad = _pad_spatial(x, pad)
        win = _windows(xpad, k, stride)
        out = np.einsum("nchwij,cij->nchw", win, w, optimize=True) + b[None, :, None, None]
        self.saved = (win, x.shape, xpad.shape)
        return out

    def backward(self, grad):
        win, xshape, xpad_shape = self.saved
        stride, pad = self.kwargs["stride"], self.kwargs["pad"]
        w = self.inputs[1].data
        k = w.shape[1]
        oh, ow = grad.shape[2], grad.shape[3]
        gw = np.einsum("nchwij,nchw->cij", win, grad, optimize=True)
        gb = grad.sum(axis=(0, 2, 3))
        gxpad = np.zeros(xpad_shape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                gxpad[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += (
                    grad * w[None, :, i, j, None, None]
                )
        if pad:
            gx = gxpad[:, :, pad:pad + xshape[2], pad:pad + xshape[3]]
        else:
            gx = gxpad
        return gx, gw, gb


class MaxPool2d(Function):
    def forward(self, x, kernel, stride, pad):
        xpad = _pad_spatial(x, pad, value=-np.inf)
        win = _windows(xpad, kernel, stride)
        n, c, oh, ow = win.shape[:4]
        flat = win.reshape(n, c, oh, ow, kernel * kernel)
        idx = np.argmax(flat, axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        self.saved = (idx, x.shape, xpad.shape, oh, ow)
        return out

    def backward(self, grad):
        idx, xshape, xpad_shape, oh, ow = self.saved
        kernel, stride, pad = self.kwargs["kernel"], self.kwargs["stride"], self.kwargs["pad"]
        n, c = xshape[0], xshape[1]
        ni, ci, hi, wi = np.indices((n, c, oh, ow))
        rows = hi * stride + idx // kernel
        cols = wi * stride + idx % kernel
        gxpad = np.zeros(xpad_shape, dtype=grad.dtype)
        np.add.at(gxpad, (ni, ci, rows, cols), grad)
        if pad:
            return gxpad[:, :, pad:pad + xshape[2], pad:pad + xshape[3]]
        return gxpad


class NearestUpsample(Function):
    def forward(self, x, factor):
        return x.repeat(factor, axis=2).repeat(factor, axis=3)

    def backward(self, grad):
        f = self.kwargs["factor"]
        n, c, h, w = grad.shape
        return grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5))


class GlobalAvgPool(Function):
    def forward(self, x):
        self.saved = (x.shape,)
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        (shape,) = self.saved
        scale = 1.0 / (shape[2] * shape[3])
        return np.broadcast_to(grad[:, :, None, None], shape) * scale


class BatchNorm2d(Function):
    """Batch statistics while training, running averages at inference.

    ``running_mean``/``running_var`` are plain arrays updated in place during
    training forward passes (momentum 0.1 by default, torch convention).
    """

    def forward(self, x, gamma, beta, running_mean, running_var, training, momentum, eps):
        if training:
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = x.shape[0] * x.shape[2] * x.shape[3]
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.astype(running_mean.dtype)
            unbiased = var * (m / (m - 1.0)) if m > 1 else var
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased.astype(running_var.dtype)
        else:
            mu = running_mean.astype(x.dtype)
            var = running_var.astype(x.dtype)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
        out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
        self.saved = (xhat, inv, gamma)
        return out

    def backward(self, grad):
        xhat, inv, gamma = self.saved
        dgamma = (grad * xhat).sum(axis=(0, 2, 3))
        dbeta = grad.sum(axis=(0, 2, 3))
        scale = (gamma * inv)[None, :, None, None]
        if self.kwargs["training"]:
            m = grad.shape[0] * grad.shape[2] * grad.shape[3]
            dx = scale / m * (
                m * grad
                - dbeta[None, :, None, None]
                - xhat * dgamma[None, :, None, None]
            )
        else:
            dx = grad * scale
        return dx, dgamma, dbeta


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2D convolution, output H' = floor((H + 2*pad - k)/stride) + 1."""
    return Conv2d.apply(x, w, b, stride=stride, pad=pad)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    return DepthwiseConv2d.apply(x, w, b, stride=stride, pad=pad)


def maxpool2d(x: Tensor, kernel: int = 3, stride: int = 2, pad: int = 0) -> Tensor:
    return MaxPool2d.apply(x, kernel=kernel, stride=stride, pad=pad)


def nearest_upsample(x: Tensor, factor: int = 2) -> Tensor:
    return NearestUpsample.apply(x, factor=factor)


def global_avg_pool(x: Tensor) -> Tensor:
    return GlobalAvgPool.apply(x)


def batchnorm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                running_var: np.ndarray, training: bool, momentum: float = 0.1,
                eps: float = 1e-5) -> Tensor:
    return BatchNorm2d.apply(x, gamma, beta, running_mean=running_mean,
                             running_var=running_var, training=training,
                             momentum=momentum, eps=eps)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error over all entries."""
    return (pred - target).abs().mean()


def bce_loss(prob: Tensor, target: Tensor, eps: float = 1e-7) -> Tensor:
    """Binary cross-entropy on probabilities in [0,1], eps-guarded at the edges."""
    one = Tensor(np.ones((), dtype=prob.dtype))
    return -(target * log(prob + eps) + (one - target) * log(one - prob + eps)).mean()
