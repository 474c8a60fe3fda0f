import math

import numpy as np
import pytest

from condtab import denoiser
from condtab.denoiser import Adam, DenoiserParams, input_width, sinusoidal_embedding
from condtab.diffusion import make_schedule, softmax
from condtab.masking import draw_masks
from condtab.schema import ColumnSpec, TableSchema
from condtab.train import loss_and_gradients, make_training_batch

TOY = TableSchema((
    ColumnSpec("lat", "numerical", always_observed=True),
    ColumnSpec("x", "numerical"),
    ColumnSpec("a", "categorical", ("p", "q")),
    ColumnSpec("b", "categorical", ("u", "v", "w")),
))


def toy_batch(seed=0, B=6, T=20):
    rng = np.random.default_rng(seed)
    x_num = rng.normal(size=(B, 2))
    x_cat = np.concatenate([np.eye(2)[rng.integers(0, 2, B)], np.eye(3)[rng.integers(0, 3, B)]], axis=1)
    masks = draw_masks(B, TOY, 1.0, 1.0, rng)
    g, m = make_schedule(T, "linear", 0.01, 0.2), make_schedule(T, "cosine")
    t = np.array([1, 2, T, 5, 1, 11])[:B]
    return make_training_batch(x_num, x_cat, masks, TOY, g, m, rng, t=t), m


def test_parameter_count_closed_form():
    p = denoiser.init(TOY, (4, 4), seed=0, emb_dim=4)
    width = 2 * (2 + 5) + (2 + 2) + 4
    assert input_width(TOY, 4) == width
    expected = (4 * 4 + 4) + (width * 4 + 4) + (4 * 4 + 4) + (4 * 7 + 7)
    assert p.count() == expected == 167


def test_init_is_deterministic_and_bounded():
    a = denoiser.init(TOY, (8, 8), seed=3, emb_dim=4)
    b = denoiser.init(TOY, (8, 8), seed=3, emb_dim=4)
    for x, y in zip(a.arrays(), b.arrays()):
        assert x.tobytes() == y.tobytes()
    w0 = a.weights[0]
    assert np.all(np.abs(w0) <= 1 / math.sqrt(w0.shape[0]))
    assert all(np.all(bias == 0) for bias in a.biases)


def test_zero_input_gives_zero_output():
    p = denoiser.init(TOY, (4, 4), seed=0, emb_dim=4)
    h = np.zeros((3, p.weights[0].shape[0]), dtype=np.float32)
    np.testing.assert_array_equal(denoiser.mlp(p, h), 0.0)


def test_hand_forward_pass():
    w1 = np.array([[0.5, -1.0], [2.0, 0.25]])
    w2 = np.array([[1.0], [-3.0]])
    p = DenoiserParams(np.eye(2), np.zeros(2), [w1, w2], [np.array([0.1, -0.2]), np.array([0.05])])
    x = np.array([[1.0, -0.5]])
    silu = lambda v: v / (1 + math.exp(-v))
    z1 = 1.0 * 0.5 + (-0.5) * 2.0 + 0.1
    z2 = 1.0 * -1.0 + (-0.5) * 0.25 - 0.2
    expected = silu(z1) * 1.0 + silu(z2) * -3.0 + 0.05
    assert denoiser.mlp(p, x)[0, 0] == pytest.approx(expected, rel=1e-12)


def test_embedding_layout_and_distinctness():
    e = sinusoidal_embedding(np.array([0, 3]), 8)
    np.testing.assert_allclose(e[0], [0, 0, 0, 0, 1, 1, 1, 1])
    freqs = np.exp(-math.log(10000.0) * np.arange(4) / 4)
    np.testing.assert_allclose(e[1], np.concatenate([np.sin(3 * freqs), np.cos(3 * freqs)]))
    all_t = sinusoidal_embedding(np.arange(1, 10_001), 128)
    assert len(np.unique(all_t.round(9), axis=0)) == 10_000


def _inputs(p, B=4, seed=0):
    rng = np.random.default_rng(seed)
    enc = 2 + 5
    return rng.normal(size=(B, enc)), rng.normal(size=(B, enc)), rng.integers(0, 2, (B, 4)).astype(float)


def test_forward_properties():
    p = denoiser.init(TOY, (16, 16), seed=1, emb_dim=8, dtype=np.float64)
    noisy, cond, bits = _inputs(p)
    noisy[1], cond[1], bits[1] = noisy[0], cond[0], bits[0]
    out, _ = denoiser.forward(p, noisy, cond, bits, np.array([5, 5, 7, 9]))
    np.testing.assert_array_equal(out[0], out[1])
    alone, _ = denoiser.forward(p, noisy[2:3], cond[2:3], bits[2:3], np.array([7]))
    np.testing.assert_allclose(alone[0], out[2], rtol=1e-12)
    other, _ = denoiser.forward(p, noisy, cond, bits, np.array([6, 5, 7, 9]))
    assert not np.allclose(other[0], out[0])
    scalar, _ = denoiser.forward(p, noisy, cond, bits, 5)
    np.testing.assert_allclose(scalar[:2], out[:2], rtol=1e-12)
    sm = softmax(out[:, 2:4])
    np.testing.assert_allclose(sm.sum(axis=1), 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        denoiser.forward(p, noisy[:, :3], cond, bits, 5)


def _flat_loss(params, batch, multi, lam=1.0):
    total, _, _ = loss_and_gradients(params, batch, TOY, multi, 1.0, lam, need_grad=False)
    return total


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed):
    params = denoiser.init(TOY, (4, 4), seed=seed, emb_dim=4, dtype=np.float64)
    # non-zero biases so every path is exercised
    rng = np.random.default_rng(seed + 10)
    for b in params.biases + [params.emb_bias]:
        b[:] = rng.normal(scale=0.3, size=b.shape)
    batch, multi = toy_batch(seed)
    _, _, grads = loss_and_gradients(params, batch, TOY, multi, 1.0, 0.7)
    h = 1e-4
    worst = 0.0
    for arr, g in zip(params.arrays(), grads):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = _flat_loss(params, batch, multi, 0.7)
            arr[idx] = old - h
            down = _flat_loss(params, batch, multi, 0.7)
            arr[idx] = old
            num = (up - down) / (2 * h)
            err = abs(num - g[idx]) / max(abs(num), abs(g[idx]), 1e-6)
            worst = max(worst, err)
    assert worst <= 1e-3


def test_gradient_linearity_and_zero_case():
    params = denoiser.init(TOY, (4, 4), seed=0, emb_dim=4, dtype=np.float64)
    batch, multi = toy_batch(0)
    batch.masks.mask_cat[:] = 1.0  # numerical loss only
    _, _, g1 = loss_and_gradients(params, batch, TOY, multi, 1.0, 1.0)
    _, _, g2 = loss_and_gradients(params, batch, TOY, multi, 2.0, 1.0)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12, atol=1e-15)
    batch.masks.mask_num[:] = 1.0  # nothing is a target
    total, parts, g0 = loss_and_gradients(params, batch, TOY, multi)
    assert total == 0.0 and not parts["has_num_targets"]
    assert all(np.all(g == 0) for g in g0)


def test_adam_first_step():
    a = [np.array([1.0, -2.0])]
    Adam(0.1).step(a, [np.array([0.5, -3.0])])
    # the first bias-corrected step moves every entry by lr * sign(g)
    np.testing.assert_allclose(a[0], [0.9, -1.9], rtol=1e-6)
