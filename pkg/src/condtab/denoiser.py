"""MLP denoiser with sinusoidal timestep embedding and hand-written backprop.

Input layout per row::

    [noisy targets (N_num + sum K) | conditions (N_num + sum K) |
     mask bits (N_num + C) | timestep embedding (d_emb)]

Output layout: ``N_num`` noise predictions followed by ``sum K`` logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schema import TableSchema

DEFAULT_HIDDEN = (256, 512, 512, 512, 512, 256)
DEFAULT_EMB_DIM = 128


def sigmoid(x: np.ndarray) -> np.ndarray:
    # the tanh form is overflow-free and several times faster than expit
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def silu(x: np.ndarray) -> np.ndarray:
    return x * sigmoid(x)


def silu_grad(x: np.ndarray) -> np.ndarray:
    s = sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def sinusoidal_embedding(t, dim: int) -> np.ndarray:
    """``dim/2`` sines then ``dim/2`` cosines at geometric frequencies."""
    if dim % 2:
        raise ValueError("embedding dim must be even")
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def input_width(schema: TableSchema, emb_dim: int) -> int:
    enc = schema.n_num + sum(schema.cat_widths)
    return 2 * enc + schema.n_num + len(schema.cat_widths) + emb_dim


@dataclass
class DenoiserParams:
    emb_weight: np.ndarray
    emb_bias: np.ndarray
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout: float = 0.0

    @property
    def emb_dim(self) -> int:
        return self.emb_weight.shape[0]

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w in self.weights[:-1])

    @property
    def dtype(self):
        return self.emb_weight.dtype

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (embedding first)."""
        out = [self.emb_weight, self.emb_bias]
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def names(self) -> list[str]:
        out = ["emb_weight", "emb_bias"]
        for i in range(len(self.weights)):
            out += [f"w{i}", f"b{i}"]
        return out

    def count(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(
            self.emb_weight.copy(), self.emb_bias.copy(),
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.dropout,
        )

    @classmethod
    def from_arrays(cls, arrays: list[np.ndarray], dropout: float = 0.0) -> "DenoiserParams":
        ws, bs = arrays[2::2], arrays[3::2]
        return cls(arrays[0], arrays[1], list(ws), list(bs), dropout)


def init(
    schema: TableSchema,
    hidden_dims=DEFAULT_HIDDEN,
    seed: int = 0,
    emb_dim: int = DEFAULT_EMB_DIM,
    dropout: float = 0.0,
    dtype=np.float32,
) -> DenoiserParams:
    """Uniform fan-in init (bound 1/sqrt(fan_in)) with zero biases."""
    if any(h <= 0 for h in hidden_dims) or emb_dim <= 0:
        raise ValueError("layer dims must be positive")
    rng = np.random.default_rng(seed)

    def layer(fan_in: int, fan_out: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)

    out_dim = schema.n_num + sum(schema.cat_widths)
    dims = [input_width(schema, emb_dim), *hidden_dims, out_dim]
    emb_w = layer(emb_dim, emb_dim)
    weights = [layer(a, b) for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(b, dtype=dtype) for b in dims[1:]]
    return DenoiserParams(emb_w, np.zeros(emb_dim, dtype=dtype), weights, biases, dropout)


@dataclass
class ForwardCache:
    sin_emb: np.ndarray
    emb_pre: np.ndarray
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    drop: list[np.ndarray | None] = field(default_factory=list)


def embed(params: DenoiserParams, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sin_emb = sinusoidal_embedding(t, params.emb_dim).astype(params.dtype)
    pre = sin_emb @ params.emb_weight + params.emb_bias
    return silu(pre), sin_emb, pre


def mlp(params: DenoiserParams, h: np.ndarray, rng: np.random.Generator | None = None,
        cache: ForwardCache | None = None) -> np.ndarray:
    """Run the MLP trunk on a fully assembled input matrix.

    Dropout is active only when ``rng`` is given and the rate is positive.
    """
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if cache is not None:
            cache.inputs.append(h)
        z = h @ w + b
        if i == n_layers - 1:
            return z
        if cache is not None:
            cache.pre.append(z)
        h = silu(z)
        mask = None
        if rng is not None and params.dropout > 0:
            keep = 1.0 - params.dropout
            mask = (rng.random(h.shape) < keep).astype(h.dtype) / keep
            h = h * mask
        if cache is not None:
            cache.drop.append(mask)
    raise AssertionError("unreachable")


def assemble(x_target_noisy, x_cond, mask_bits, emb) -> np.ndarray:
    return np.concatenate([x_target_noisy, x_cond, mask_bits, emb], axis=1)


def forward(
    params: DenoiserParams,
    x_target_noisy: np.ndarray,
    x_cond: np.ndarray,
    mask_bits: np.ndarray,
    t,
    rng: np.random.Generator | None = None,
    keep_cache: bool = False,
):
    """Predict noise (numerical) and logits (categorical) for a batch.

    ``t`` is a scalar or a per-row integer array. ``mask_bits`` holds one bit
    per numerical feature and one per categorical feature (1 = observed).
    Returns ``(out, cache)`` where ``out`` has width ``N_num + sum K``.
    """
    dt = params.dtype
    B = x_target_noisy.shape[0]
    t = np.asarray(t)
    if t.ndim == 0:
        # one shared timestep: embed once, then broadcast
        e, s, p = embed(params, t.reshape(1))
        emb, sin_emb, emb_pre = (np.broadcast_to(a, (B, a.shape[1])) for a in (e, s, p))
    else:
        emb, sin_emb, emb_pre = embed(params, t)
    expected = params.weights[0].shape[0]
    h = assemble(x_target_noisy.astype(dt, copy=False), x_cond.astype(dt, copy=False),
                 mask_bits.astype(dt, copy=False), emb)
    if h.shape[1] != expected:
        raise ValueError(f"input width {h.shape[1]} does not match network input {expected}")
    cache = ForwardCache(sin_emb, emb_pre) if keep_cache else None
    out = mlp(params, h, rng=rng, cache=cache)
    return out, cache


def backward(params: DenoiserParams, cache: ForwardCache, d_out: np.ndarray) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter, given dloss/dout.

    Returned in the order of ``params.arrays()``.
    """
    dt = params.dtype
    d = d_out.astype(dt, copy=False)
    n_layers = len(params.weights)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for i in reversed(range(n_layers)):
        h_in = cache.inputs[i]
        gw[i] = h_in.T @ d
        gb[i] = d.sum(axis=0)
        d = d @ params.weights[i].T
        if i > 0:
            if cache.drop[i - 1] is not None:
                d = d * cache.drop[i - 1]
            d = d * silu_grad(cache.pre[i - 1])
    emb_dim = params.emb_dim
    d_emb = d[:, -emb_dim:] * silu_grad(cache.emb_pre)
    g_emb_w = np.asarray(cache.sin_emb).T @ d_emb
    g_emb_b = d_emb.sum(axis=0)
    grads = [g_emb_w, g_emb_b]
    for w, b in zip(gw, gb):
        grads += [w, b]
    return grads


class Adam:
    """Adam optimizer over a fixed list of arrays, updated in place."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray], lr: float | None = None) -> None:
        if self.m is None:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        lr = self.lr if lr is None else lr
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            g = g.astype(a.dtype, copy=False)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
