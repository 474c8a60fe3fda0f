"""Noise schedules plus Gaussian and multinomial diffusion math.

Timesteps are 1-based: ``t`` runs over ``1..T`` and ``alpha_bar(0) == 1``.
Every function here is pure and vectorised over leading batch axes; a
per-row ``t`` array broadcasts against the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12
COSINE_OFFSET = 0.008
MAX_COSINE_BETA = 0.999


@dataclass(frozen=True)
class DiffusionSchedule:
    beta: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=np.float64)
        if b.ndim != 1 or len(b) < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(b <= 0) or np.any(b >= 1):
            raise ValueError("every beta must lie in (0, 1)")
        object.__setattr__(self, "beta", b)

    @property
    def T(self) -> int:
        return len(self.beta)

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    @property
    def alpha_bar_prev(self) -> np.ndarray:
        """``alpha_bar`` shifted by one step, with ``alpha_bar(0) = 1``."""
        return np.concatenate([[1.0], self.alpha_bar[:-1]])

    @property
    def posterior_variance(self) -> np.ndarray:
        """beta_t (1 - abar_{t-1}) / (1 - abar_t); zero at t = 1."""
        return self.beta * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar)

    @property
    def posterior_sigma(self) -> np.ndarray:
        return np.sqrt(self.posterior_variance)

    def at(self, name: str, t) -> np.ndarray:
        """Look up a per-step array at 1-based timestep(s) ``t``."""
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise ValueError(f"timestep out of range 1..{self.T}")
        return getattr(self, name)[t - 1]


def cosine_alpha_bar(t, T: int) -> np.ndarray:
    """f(t)/f(0) with f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2)."""
    f = lambda u: np.cos((np.asarray(u, dtype=np.float64) / T + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi / 2) ** 2
    return f(t) / f(0)


def make_schedule(T: int, kind: str = "linear", beta_min: float = 1e-4, beta_max: float = 0.02) -> DiffusionSchedule:
    if T < 1:
        raise ValueError("T must be >= 1")
    if kind == "linear":
        if not (0 < beta_min <= beta_max < 1):
            raise ValueError("linear schedule needs 0 < beta_min <= beta_max < 1")
        return DiffusionSchedule(np.linspace(beta_min, beta_max, T))
    if kind == "cosine":
        abar = cosine_alpha_bar(np.arange(0, T + 1), T)
        beta = np.minimum(1.0 - abar[1:] / abar[:-1], MAX_COSINE_BETA)
        return DiffusionSchedule(beta)
    raise ValueError(f"unknown schedule kind {kind!r}")


def _col(values: np.ndarray, ndim: int) -> np.ndarray:
    # per-row scalars broadcast over the feature axis
    values = np.asarray(values, dtype=np.float64)
    return values.reshape(values.shape + (1,) * (ndim - values.ndim)) if values.ndim else values


# Gaussian diffusion ---------------------------------------------------------

def gaussian_forward(x0, t, eps, sched: DiffusionSchedule) -> np.ndarray:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    abar = _col(sched.at("alpha_bar", t), x0.ndim)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * np.asarray(eps)


def gaussian_reverse_mean(x_t, eps_pred, t, sched: DiffusionSchedule) -> np.ndarray:
    """Mean of p(x_{t-1} | x_t) under the noise-prediction parametrisation."""
    x_t = np.asarray(x_t, dtype=np.float64)
    alpha = _col(sched.at("alpha", t), x_t.ndim)
    beta = _col(sched.at("beta", t), x_t.ndim)
    abar = _col(sched.at("alpha_bar", t), x_t.ndim)
    return (x_t - beta / np.sqrt(1.0 - abar) * np.asarray(eps_pred)) / np.sqrt(alpha)


def gaussian_loss(eps_true, eps_pred, target_mask) -> tuple[float, bool]:
    """Masked MSE over target entries.

    Returns ``(loss, has_targets)``; the loss is 0 when the mask is empty.
    """
    m = np.asarray(target_mask, dtype=bool)
    n = int(m.sum())
    if n == 0:
        return 0.0, False
    diff = np.asarray(eps_true, dtype=np.float64) - np.asarray(eps_pred, dtype=np.float64)
    return float(np.sum(diff[m] ** 2) / n), True


# Multinomial diffusion ------------------------------------------------------

def multinomial_forward_probs(x0, t, sched: DiffusionSchedule) -> np.ndarray:
    """q(x_t | x_0) = Cat(abar_t x0 + (1 - abar_t)/K)."""
    x0 = np.asarray(x0, dtype=np.float64)
    K = x0.shape[-1]
    abar = _col(sched.at("alpha_bar", t), x0.ndim)
    return abar * x0 + (1.0 - abar) / K


def _posterior_unnormalized(x_t, x0_probs, alpha, abar_prev) -> np.ndarray:
    K = x_t.shape[-1]
    return (alpha * x_t + (1.0 - alpha) / K) * (abar_prev * x0_probs + (1.0 - abar_prev) / K)


def multinomial_posterior(x_t, x0_probs, t, sched: DiffusionSchedule) -> np.ndarray:
    """q(x_{t-1} | x_t, x_0) with x_0 replaced by a probability vector."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_probs = np.asarray(x0_probs, dtype=np.float64)
    alpha = _col(sched.at("alpha", t), x_t.ndim)
    abar_prev = _col(sched.at("alpha_bar_prev", t), x_t.ndim)
    pi = _posterior_unnormalized(x_t, x0_probs, alpha, abar_prev)
    return pi / pi.sum(axis=-1, keepdims=True)


def categorical_kl(q, p) -> np.ndarray:
    """KL(q || p) along the last axis, with 0 log 0 = 0 and p floored."""
    q = np.asarray(q, dtype=np.float64)
    p = np.maximum(np.asarray(p, dtype=np.float64), PROB_FLOOR)
    safe_q = np.where(q > 0, q, 1.0)
    return np.sum(np.where(q > 0, q * (np.log(safe_q) - np.log(p)), 0.0), axis=-1)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def multinomial_term(x0, x_t, logits, t, sched: DiffusionSchedule) -> tuple[np.ndarray, np.ndarray]:
    """Per-row variational term for one categorical block and its logit gradient.

    For t >= 2 the term is KL(q(x_{t-1}|x_t,x_0) || q(x_{t-1}|x_t,x0_hat)); at
    t = 1 it is the decoder negative log-likelihood -log x0_hat[x_0]. The
    predicted x0_hat is the softmax of ``logits``.

    Returns ``(loss[B], dloss/dlogits[B, K])``.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    logits = np.asarray(logits, dtype=np.float64)
    t = np.asarray(t)
    K = x0.shape[-1]
    probs = softmax(logits)
    alpha = sched.at("alpha", t)[:, None]
    abar_prev = sched.at("alpha_bar_prev", t)[:, None]

    a = alpha * x_t + (1.0 - alpha) / K
    b_true = abar_prev * x0 + (1.0 - abar_prev) / K
    b_pred = abar_prev * probs + (1.0 - abar_prev) / K
    q = a * b_true
    q /= q.sum(axis=1, keepdims=True)
    p_unnorm = a * b_pred
    p = p_unnorm / p_unnorm.sum(axis=1, keepdims=True)
    kl = categorical_kl(q, p)
    # d KL / d b_pred = (p - q) / b_pred, only where p sits above the floor
    g_b = np.where(p > PROB_FLOOR, (p - q) / b_pred, 0.0)
    g_probs = abar_prev * g_b
    g_kl = probs * (g_probs - np.sum(probs * g_probs, axis=1, keepdims=True))

    nll = -np.log(np.maximum(np.sum(probs * x0, axis=1), PROB_FLOOR))
    g_nll = probs - x0

    first = (t == 1)[:, None]
    loss = np.where(t == 1, nll, kl)
    grad = np.where(first, g_nll, g_kl)
    return loss, grad


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one category per row; returns one-hot rows."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((probs.shape[0], 1)) * cdf[:, -1:]
    idx = np.minimum((u > cdf).sum(axis=1), probs.shape[1] - 1)
    out = np.zeros_like(probs, dtype=np.float64)
    out[np.arange(len(idx)), idx] = 1.0
    return out
