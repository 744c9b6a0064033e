"""Named parameter storage shared by models, optimizers and checkpoints."""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from .tensor import Tensor


class ParamStore:
    """Flat map from dotted path to Tensor.

    Trainable parameters carry ``requires_grad=True``; persistent buffers
    (batchnorm running stats) are stored with ``requires_grad=False`` so the
    checkpoint format captures them too. ``slow_weights`` is the LookAhead
    shadow copy, populated lazily by the optimizer.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.slow_weights: Optional[dict[str, np.ndarray]] = None

    def add(self, name: str, data, requires_grad: bool = True) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float32), requires_grad=requires_grad)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def trainable(self) -> Iterator[tuple[str, Tensor]]:
        return ((n, t) for n, t in self._params.items() if t.requires_grad)

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def freeze(self):
        for t in self._params.values():
            t.requires_grad = False

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray], strict: bool = True):
        """Copy values into existing tensors by name, keeping grad flags."""
        missing = [n for n in self._params if n not in arrays]
        if strict and missing:
            raise KeyError(f"checkpoint missing parameters: {missing[:5]}")
        for n, t in self._params.items():
            if n not in arrays:
                continue
            a = np.asarray(arrays[n], dtype=t.data.dtype)
            if a.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {n!r}: stored {a.shape}, expected {t.data.shape}"
                )
            t.data = a.copy()


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)


def normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(np.float32)
