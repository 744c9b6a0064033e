"""Rectified Adam with LookAhead slow weights and cosine-annealed learning rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ParamStore


@dataclass
class OptimizerState:
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    lookahead_k: int = 5
    lookahead_alpha: float = 0.5
    base_lr: float = 1e-3
    cosine_half_period: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epoch: int = 0

    def __post_init__(self):
        if self.lookahead_k < 1:
            raise ValueError("lookahead_k must be >= 1")
        if not 0.0 < self.lookahead_alpha <= 1.0:
            raise ValueError("lookahead_alpha must be in (0, 1]")


def cosine_lr(base_lr: float, epoch: int, half_period: int) -> float:
    """base_lr at epoch 0, annealed to 0 at epoch == half_period (clamped after)."""
    t = min(max(epoch, 0), half_period)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * t / half_period))


def optimizer_step(params: ParamStore, state: OptimizerState):
    """One RAdam update over all trainable params, then LookAhead sync every k steps.

    Gradients are read from each tensor's ``grad`` buffer; a missing gradient
    on a trainable parameter is an error.
    """
    missing = [n for n, t in params.trainable() if t.grad is None]
    if missing:
        raise ValueError(f"missing gradient for parameters: {missing}")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    lr = cosine_lr(state.base_lr, state.epoch, state.cosine_half_period)

    rho_inf = 2.0 / (1.0 - b2) - 1.0
    b2t = b2 ** t
    rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t)
    bias1 = 1.0 - b1 ** t

    if rho_t > 4.0:
        rect = math.sqrt(
            ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
            / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
        )
    else:
        rect = None

    for name, p in params.trainable():
        g = p.grad
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
            state.first_moment[name] = m
            state.second_moment[name] = v
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bias1
        if rect is not None:
            v_hat = np.sqrt(v / (1.0 - b2t)) + state.eps
            p.data = p.data - lr * rect * m_hat / v_hat
        else:
            # variance not yet tractable: un-adapted update per the rectified method
            p.data = p.data - lr * m_hat

    if state.step_count % state.lookahead_k == 0:
        if params.slow_weights is None:
            raise RuntimeError("slow weights not initialized; use RAdamLookahead or seed them")
        a = state.lookahead_alpha
        for name, p in params.trainable():
            slow = params.slow_weights[name]
            slow += a * (p.data - slow)
            p.data = slow.copy()


class RAdamLookahead:
    """Convenience wrapper owning an OptimizerState bound to one ParamStore."""

    def __init__(self, params: ParamStore, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, lookahead_k: int = 5, lookahead_alpha: float = 0.5,
                 cosine_half_period: int = 100):
        self.params = params
        self.state = OptimizerState(
            base_lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
            lookahead_k=lookahead_k, lookahead_alpha=lookahead_alpha,
            cosine_half_period=cosine_half_period,
        )
        params.slow_weights = {n: t.data.copy() for n, t in params.trainable()}

    @property
    def lr(self) -> float:
        return cosine_lr(self.state.base_lr, self.state.epoch, self.state.cosine_half_period)

    def set_epoch(self, epoch: int):
        self.state.epoch = epoch

    def zero_grad(self):
        self.params.zero_grad()

    def step(self):
        optimizer_step(self.params, self.state)
