"""Reverse-mode differentiable tensors on top of numpy arrays.

The graph is dynamic: every op records a small context object on its
output, and ``Tensor.backward`` walks the graph in reverse topological
order. Arrays are float32 by default; float64 inputs are kept as-is so
gradient checking can run at higher precision.
"""

from __future__ import annotations

import contextlib
from typing import Optional, Sequence

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype in _FLOAT_DTYPES:
        return arr
    return arr.astype(np.float32)


class Tensor:
    """N-dimensional float array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_ctx")

    def __init__(self, data, requires_grad: bool = False, _ctx: Optional["Function"] = None,
                 dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx = _ctx

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate gradients of a scalar (or explicitly seeded) output."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError(
                    f"backward() needs an explicit gradient for non-scalar output of shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)

        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.inputs:
                    if parent._ctx is not None or parent.requires_grad:
                        stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._ctx is None:
                continue
            input_grads = node._ctx.backward(g)
            if not isinstance(input_grads, tuple):
                input_grads = (input_grads,)
            for parent, pg in zip(node._ctx.inputs, input_grads):
                if pg is None or not (parent.requires_grad or parent._ctx is not None):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return Add.apply(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sub.apply(self, _wrap(other))

    def __rsub__(self, other):
        return Sub.apply(_wrap(other), self)

    def __mul__(self, other):
        return Mul.apply(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Div.apply(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div.apply(_wrap(other), self)

    def __neg__(self):
        return Neg.apply(self)

    def __pow__(self, exponent):
        return Pow.apply(self, exponent=float(exponent))

    def __matmul__(self, other):
        return MatMul.apply(self, _wrap(other))

    def sum(self, axis=None, keepdims=False):
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Reshape.apply(self, shape=shape)

    def transpose(self, axes: Sequence[int]):
        return Transpose.apply(self, axes=tuple(axes))

    def abs(self):
        return Abs.apply(self)

    def exp(self):
        return Exp.apply(self)

    def log(self):
        return Log.apply(self)

    def tanh(self):
        return Tanh.apply(self)

    def clip(self, lo: float, hi: float):
        return Clip.apply(self, lo=float(lo), hi=float(hi))

    def take(self, idx):
        return Take.apply(self, idx=np.asarray(idx, dtype=np.intp))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Function:
    """One recorded op: forward computes data, backward maps output grad to input grads."""

    __slots__ = ("inputs", "saved", "kwargs")

    def __init__(self, *inputs: Tensor, **kwargs):
        self.inputs = inputs
        self.kwargs = kwargs
        self.saved: tuple = ()

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs) -> Tensor:
        ctx = cls(*inputs, **kwargs)
        out_data = ctx.forward(*(t.data for t in inputs), **kwargs)
        if _grad_enabled and any(t.requires_grad or t._ctx is not None for t in inputs):
            return Tensor(out_data, requires_grad=False, _ctx=ctx)
        return Tensor(out_data)

    def forward(self, *arrays, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray):
        raise NotImplementedError


class Add(Function):
    def forward(self, x, y):
        self.saved = (x.shape, y.shape)
        return x + y

    def backward(self, grad):
        xs, ys = self.saved
        return _unbroadcast(grad, xs), _unbroadcast(grad, ys)


class Sub(Function):
    def forward(self, x, y):
        self.saved = (x.shape, y.shape)
        return x - y

    def backward(self, grad):
        xs, ys = self.saved
        return _unbroadcast(grad, xs), _unbroadcast(-grad, ys)


class Mul(Function):
    def forward(self, x, y):
        self.saved = (x, y)
        return x * y

    def backward(self, grad):
        x, y = self.saved
        return _unbroadcast(grad * y, x.shape), _unbroadcast(grad * x, y.shape)


class Div(Function):
    def forward(self, x, y):
        self.saved = (x, y)
        return x / y

    def backward(self, grad):
        x, y = self.saved
        gx = _unbroadcast(grad / y, x.shape)
        gy = _unbroadcast(-grad * x / (y * y), y.shape)
        return gx, gy


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return -grad


class Pow(Function):
    def forward(self, x, exponent):
        self.saved = (x,)
        return x ** exponent

    def backward(self, grad):
        (x,) = self.saved
        p = self.kwargs["exponent"]
        return grad * p * x ** (p - 1.0)


class MatMul(Function):
    """np.matmul semantics, including leading batch-dim broadcasting."""

    def forward(self, x, y):
        self.saved = (x, y)
        return np.matmul(x, y)

    def backward(self, grad):
        x, y = self.saved
        gx = _unbroadcast(np.matmul(grad, np.swapaxes(y, -1, -2)), x.shape)
        gy = _unbroadcast(np.matmul(np.swapaxes(x, -1, -2), grad), y.shape)
        return gx, gy


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.saved = (x.shape,)
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        (shape,) = self.saved
        axis = self.kwargs["axis"]
        if axis is not None and not self.kwargs["keepdims"]:
            grad = np.expand_dims(grad, axis)
        return np.broadcast_to(grad, shape)


class Mean(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.saved = (x.shape,)
        return np.mean(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        (shape,) = self.saved
        axis = self.kwargs["axis"]
        if axis is None:
            n = int(np.prod(shape))
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            n = int(np.prod([shape[a] for a in axes]))
            if not self.kwargs["keepdims"]:
                grad = np.expand_dims(grad, axis)
        return np.broadcast_to(grad, shape) / n


class Reshape(Function):
    def forward(self, x, shape):
        self.saved = (x.shape,)
        return np.reshape(x, shape)

    def backward(self, grad):
        (shape,) = self.saved
        return np.reshape(grad, shape)


class Transpose(Function):
    def forward(self, x, axes):
        return np.transpose(x, axes)

    def backward(self, grad):
        return np.transpose(grad, np.argsort(self.kwargs["axes"]))


class Take(Function):
    """Select rows along axis 0 with an integer index array."""

    def forward(self, x, idx):
        self.saved = (x.shape,)
        return x[idx]

    def backward(self, grad):
        (shape,) = self.saved
        out = np.zeros(shape, dtype=grad.dtype)
        np.add.at(out, self.kwargs["idx"], grad)
        return out


class Abs(Function):
    def forward(self, x):
        self.saved = (np.sign(x),)
        return np.abs(x)

    def backward(self, grad):
        (sign,) = self.saved
        return grad * sign


class Exp(Function):
    def forward(self, x):
        out = np.exp(x)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return grad * out


class Log(Function):
    def forward(self, x):
        self.saved = (x,)
        return np.log(x)

    def backward(self, grad):
        (x,) = self.saved
        return grad / x


class Tanh(Function):
    def forward(self, x):
        out = np.tanh(x)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return grad * (1.0 - out * out)


class Clip(Function):
    def forward(self, x, lo, hi):
        self.saved = ((x >= lo) & (x <= hi),)
        return np.clip(x, lo, hi)

    def backward(self, grad):
        (mask,) = self.saved
        return grad * mask


class Sigmoid(Function):
    def forward(self, x):
        out = _sigmoid_array(x)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return grad * out * (1.0 - out)


class Softplus(Function):
    """log(1+exp(x)) computed as max(x,0) + log1p(exp(-|x|)) to avoid overflow."""

    def forward(self, x):
        self.saved = (x,)
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def backward(self, grad):
        (x,) = self.saved
        return grad * _sigmoid_array(x)


class Mish(Function):
    """x * tanh(softplus(x)); fused so the hot path is one graph node."""

    def forward(self, x):
        sp = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
        t = np.tanh(sp)
        self.saved = (x, t)
        return x * t

    def backward(self, grad):
        x, t = self.saved
        return grad * (t + x * (1.0 - t * t) * _sigmoid_array(x))


class Softmax(Function):
    def forward(self, x, axis):
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / np.sum(e, axis=axis, keepdims=True)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        axis = self.kwargs["axis"]
        dot = np.sum(grad * out, axis=axis, keepdims=True)
        return (grad - dot) * out


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; the two branches share it
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def softplus(x: Tensor) -> Tensor:
    return Softplus.apply(x)


def mish(x: Tensor) -> Tensor:
    """Self-gated activation x * tanh(softplus(x))."""
    return Mish.apply(x)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Shift-stabilized softmax along ``axis``: non-negative, sums to 1."""
    return Softmax.apply(x, axis=axis)


def tanh(x: Tensor) -> Tensor:
    return Tanh.apply(x)


def exp(x: Tensor) -> Tensor:
    return Exp.apply(x)


def log(x: Tensor) -> Tensor:
    return Log.apply(x)
