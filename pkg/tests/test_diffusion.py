import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from condtab.diffusion import (DiffusionSchedule, categorical_kl, gaussian_forward, gaussian_loss,
                               gaussian_reverse_mean, make_schedule, multinomial_forward_probs,
                               multinomial_posterior)

probs3 = arrays(np.float64, 3, elements=st.floats(0.001, 1.0)).map(lambda a: a / a.sum())


def test_single_step_linear_schedule():
    s = make_schedule(1, "linear", 0.5, 0.5)
    np.testing.assert_allclose(s.beta, [0.5])
    np.testing.assert_allclose(s.alpha_bar, [0.5])


@pytest.mark.parametrize("kind", ["linear", "cosine"])
def test_alpha_bar_strictly_decreasing(kind):
    s = make_schedule(1000, kind)
    assert np.all(np.diff(s.alpha_bar) < 0)
    assert np.all((s.beta > 0) & (s.beta < 1))


def test_cosine_alpha_bar_matches_direct_evaluation():
    # f(t)/f(0), evaluated separately at 30 significant digits
    expected = [0.847012161326904734, 0.493843590440637713, 0.144272102385735711]
    s = make_schedule(4, "cosine")
    np.testing.assert_allclose(s.alpha_bar[:3], expected, rtol=1e-12)
    # the last step would need beta = 1; it is clipped
    assert s.beta[3] == pytest.approx(0.999)


@pytest.mark.parametrize("args", [(0, "linear"), (10, "linear", 0.0, 0.02), (10, "linear", 0.3, 0.2),
                                  (10, "sigmoid")])
def test_schedule_errors(args):
    with pytest.raises(ValueError):
        make_schedule(*args)


def test_gaussian_forward_special_cases():
    s = make_schedule(10)
    x0 = np.array([[1.0, -2.0]])
    eps = np.array([[0.3, 0.7]])
    ab = s.alpha_bar[4]
    np.testing.assert_allclose(gaussian_forward(x0, 5, np.zeros_like(x0), s), math.sqrt(ab) * x0)
    np.testing.assert_allclose(gaussian_forward(np.zeros_like(x0), 5, eps, s), math.sqrt(1 - ab) * eps)
    tiny = DiffusionSchedule(np.full(3, 1e-15))
    np.testing.assert_allclose(gaussian_forward(x0, 3, eps, tiny), x0, atol=1e-7)


def test_reverse_mean_hand_value():
    # alpha_2 = 0.99 and alpha_bar_2 = 0.9
    s = DiffusionSchedule(np.array([1 - 0.9 / 0.99, 0.01]))
    mu = gaussian_reverse_mean(np.array([1.0]), np.array([0.5]), 2, s)
    assert mu[0] == pytest.approx(0.989146772105118870, rel=1e-12)
    np.testing.assert_allclose(gaussian_reverse_mean(np.array([2.0]), np.array([0.0]), 2, s), 2.0 / math.sqrt(0.99))


def test_reverse_inverts_forward_for_tiny_beta():
    s = DiffusionSchedule(np.full(5, 1e-14))
    rng = np.random.default_rng(0)
    x0, eps = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    for t in range(1, 6):
        x_t = gaussian_forward(x0, t, eps, s)
        np.testing.assert_allclose(gaussian_reverse_mean(x_t, eps, t, s), x0, atol=1e-6)


def test_two_forward_steps_compose():
    s = make_schedule(2, "linear", 0.1, 0.3)
    rng = np.random.default_rng(1)
    x0, e1, e2 = rng.normal(size=(3, 5))
    a1, a2 = s.alpha
    x1 = math.sqrt(a1) * x0 + math.sqrt(1 - a1) * e1
    x2 = math.sqrt(a2) * x1 + math.sqrt(1 - a2) * e2
    # the two noises combine into one standard normal draw
    combined = (math.sqrt(a2 * (1 - a1)) * e1 + math.sqrt(1 - a2) * e2) / math.sqrt(1 - a1 * a2)
    np.testing.assert_allclose(gaussian_forward(x0, 2, combined, s), x2, atol=1e-10)


def test_posterior_sigma_value():
    s = make_schedule(10)
    t = 6
    expected = s.beta[t - 1] * (1 - s.alpha_bar[t - 2]) / (1 - s.alpha_bar[t - 1])
    assert s.posterior_sigma[t - 1] == pytest.approx(math.sqrt(expected))


def test_gaussian_loss():
    e = np.array([[1.0, 2.0]])
    assert gaussian_loss(e, e, np.ones_like(e)) == (0.0, True)
    assert gaussian_loss(np.array([[0.0, 5.0]]), np.array([[2.0, 0.0]]), np.array([[1, 0]])) == (4.0, True)
    assert gaussian_loss(e, e + 1, np.zeros_like(e)) == (0.0, False)


def test_multinomial_forward_values():
    x0 = np.array([[1.0, 0.0]])
    half = DiffusionSchedule(np.array([0.5]))
    np.testing.assert_allclose(multinomial_forward_probs(x0, 1, half), [[0.75, 0.25]])
    np.testing.assert_allclose(multinomial_forward_probs(x0, 1, DiffusionSchedule(np.array([1e-300]))), x0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(1, 50), st.integers(0, 7))
def test_multinomial_forward_sums_to_one(K, t, hot):
    x0 = np.eye(K)[[hot % K]]
    p = multinomial_forward_probs(x0, t, make_schedule(50, "cosine"))
    assert abs(p.sum() - 1.0) <= 1e-12 and np.all(p >= 0)


def test_multinomial_posterior_hand_value():
    # alpha_2 = 0.9 and alpha_bar_1 = 0.5
    s = DiffusionSchedule(np.array([0.5, 0.1]))
    post = multinomial_posterior(np.array([[0.0, 1.0, 0.0]]), np.array([[0.7, 0.2, 0.1]]), 2, s)
    np.testing.assert_allclose(post, [[0.063008130081300813, 0.910569105691056911, 0.026422764227642276]],
                               rtol=1e-12)


def test_multinomial_posterior_identity_and_uniform():
    s = DiffusionSchedule(np.array([1e-300, 1e-300]))
    x_t = np.array([[0.0, 0.0, 1.0]])
    np.testing.assert_allclose(multinomial_posterior(x_t, x_t, 2, s), x_t, atol=1e-12)
    s2 = make_schedule(10, "cosine")
    post = multinomial_posterior(x_t, np.full((1, 3), 1 / 3), 4, s2)
    a = s2.alpha[3]
    first = a * x_t + (1 - a) / 3
    np.testing.assert_allclose(post, first / first.sum())


def test_kl_values():
    assert categorical_kl([0.2, 0.8], [0.2, 0.8]) == pytest.approx(0.0)
    assert categorical_kl([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert categorical_kl([0.7, 0.3], [0.3, 0.7]) == pytest.approx(0.338919144154881445, rel=1e-12)
    assert np.isfinite(categorical_kl([1.0, 0.0], [0.0, 1.0]))


@settings(max_examples=200, deadline=None)
@given(probs3, probs3)
def test_kl_non_negative(q, p):
    assert categorical_kl(q, p) >= -1e-12
    assert categorical_kl(q, q) == pytest.approx(0.0, abs=1e-12)


def test_timestep_range_checked():
    s = make_schedule(5)
    with pytest.raises(ValueError):
        s.at("alpha", 0)
    with pytest.raises(ValueError):
        s.at("alpha", 6)
