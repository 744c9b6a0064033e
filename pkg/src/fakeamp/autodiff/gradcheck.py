"""Central-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Compare analytic gradients of scalar-valued ``f`` against central differences.

    Returns max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    Evaluation runs in float64 regardless of the input dtype so the finite
    differences are not drowned by single-precision rounding.
    """
    base = x.data.astype(np.float64)

    probe = Tensor(base.copy(), requires_grad=True)
    out = f(probe)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ValueError("grad_check requires f to return a scalar Tensor")
    out.backward()
    if probe.grad is None:
        raise ValueError("f does not depend on x (no gradient reached the input)")
    analytic = probe.grad.reshape(-1).astype(np.float64)

    numeric = np.zeros_like(analytic)
    flat = base.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(Tensor(base.copy())).data)
        flat[i] = orig - eps
        lo = float(f(Tensor(base.copy())).data)
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
