"""Adam on flat parameter vectors plus the uniform perturbation operator."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, DimensionError

__all__ = ["AdamState", "adam_update", "perturb"]


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and step counter for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, lr: float = 0.01) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), lr=lr)

    def with_lr(self, lr: float) -> "AdamState":
        return replace(self, lr=lr)


def adam_update(params: np.ndarray, grads: np.ndarray,
                st: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam step; returns (new params, new state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != st.m.shape:
        raise DimensionError("parameter, gradient, and moment shapes differ")
    step = st.step + 1
    m = st.beta1 * st.m + (1.0 - st.beta1) * grads
    v = st.beta2 * st.v + (1.0 - st.beta2) * grads * grads
    m_hat = m / (1.0 - st.beta1 ** step)
    v_hat = v / (1.0 - st.beta2 ** step)
    out = params - st.lr * m_hat / (np.sqrt(v_hat) + st.eps)
    return out, replace(st, m=m, v=v, step=step)


def perturb(theta_star: np.ndarray, xi: float, rng) -> np.ndarray:
    """Each coordinate drawn uniformly from [theta - xi, theta + xi]."""
    if xi <= 0:
        raise ConfigError("perturbation half-width must be positive")
    theta_star = np.asarray(theta_star, dtype=np.float64)
    return theta_star + rng.uniform(-xi, xi, theta_star.shape)
