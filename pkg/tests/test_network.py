import numpy as np
import pytest
from scipy.special import ndtr

from memform import Mlp, Normalization, forward_jet, forward_value, init_mlp, param_gradient
from memform.cli import _fd_jet
from memform.network import (
    backward_value,
    gelu_terms,
    load_params,
    save_params,
)
from conftest import small_mlp


def test_parameter_counts():
    # (2 w + w) + (n_hidden - 1)(w^2 + w) + (w + 1), hand-derived
    soft = init_mlp(5, 128, 0)
    assert soft.n_params == 66561
    hard = init_mlp(4, 256, 0)
    assert hard.n_params == 198401
    assert soft.to_vector().size == soft.n_params


def test_init_distribution_and_determinism():
    mlp = init_mlp(3, 32, 7)
    assert mlp.layer_sizes == [2, 32, 32, 32, 1]
    for w in mlp.weights:
        bound = 1.0 / np.sqrt(w.shape[1])
        assert np.max(np.abs(w)) <= bound
    for b in mlp.biases:
        assert np.all(b == 0.0)
    again = init_mlp(3, 32, 7)
    np.testing.assert_array_equal(mlp.to_vector(), again.to_vector())
    with pytest.raises(ValueError):
        init_mlp(0, 32, 7)


def test_gelu_terms_closed_forms():
    u = np.linspace(-4, 4, 41)
    g, g1, g2, g3 = gelu_terms(u, order=3)
    pdf = np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)
    np.testing.assert_allclose(g, u * ndtr(u), atol=1e-15)
    np.testing.assert_allclose(g1, ndtr(u) + u * pdf, atol=1e-15)
    np.testing.assert_allclose(g2, pdf * (2 - u * u), atol=1e-15)
    np.testing.assert_allclose(g3, pdf * (u**3 - 4 * u), atol=1e-15)
    # each term is the derivative of the one before it
    h = 1e-6
    for k in range(3):
        at = gelu_terms(u[1:-1] + h, order=3)[k]
        below = gelu_terms(u[1:-1] - h, order=3)[k]
        np.testing.assert_allclose(
            (at - below) / (2 * h), gelu_terms(u[1:-1], order=3)[k + 1], atol=1e-7
        )


def test_forward_value_matches_jet_value():
    mlp = small_mlp(seed=3, half_widths=(6.5, 4.0))
    x = np.random.default_rng(0).uniform(-4, 4, size=(50, 2))
    np.testing.assert_allclose(forward_value(mlp, x), forward_jet(mlp, x).f, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_jets_match_finite_differences(seed):
    mlp = small_mlp(seed=seed, n_hidden=3, width=24, half_widths=(2.0, 3.0))
    x = np.random.default_rng(seed + 50).uniform(-1.5, 1.5, size=(30, 2))
    jet = forward_jet(mlp, x)
    ref = _fd_jet(lambda p: forward_value(mlp, p), x)
    for name in ("f", "f1", "f2", "f11", "f12", "f22"):
        got, want = getattr(jet, name), getattr(ref, name)
        scale = np.max(np.abs(want)) + 1e-12
        assert np.max(np.abs(got - want)) / scale < 1e-4, name


def test_value_gradient_matches_finite_differences():
    mlp = small_mlp(seed=9, n_hidden=2, width=10)
    x = np.random.default_rng(1).uniform(-1, 1, size=(12, 2))
    fbar = np.random.default_rng(2).standard_normal(12)
    _, cache = forward_value(mlp, x, need_cache=True)
    grad = backward_value(mlp, cache, fbar)
    theta = mlp.to_vector()
    eps = 1e-6
    rng = np.random.default_rng(3)
    for _ in range(5):
        d = rng.standard_normal(theta.size)
        d /= np.linalg.norm(d)

        def loss(v):
            probe = mlp.copy()
            probe.set_vector(v)
            return float(fbar @ forward_value(probe, x))

        fd = (loss(theta + eps * d) - loss(theta - eps * d)) / (2 * eps)
        assert abs(grad @ d - fd) / (abs(fd) + 1e-12) < 1e-6


def test_param_gradient_directional():
    def loss_fn(jet):
        arr = jet.as_array()
        return 0.5 * float(np.sum(arr**2)) / arr.shape[1], arr / arr.shape[1]

    for seed in range(3):
        mlp = small_mlp(seed=seed + 20, n_hidden=2, width=12)
        x = np.random.default_rng(seed).uniform(-1, 1, size=(15, 2))
        _, grad = param_gradient(mlp, x, loss_fn)
        theta = mlp.to_vector()
        d = np.random.default_rng(seed + 9).standard_normal(theta.size)
        d /= np.linalg.norm(d)
        eps = 1e-6

        def loss(v):
            probe = mlp.copy()
            probe.set_vector(v)
            return loss_fn(forward_jet(probe, x))[0]

        fd = (loss(theta + eps * d) - loss(theta - eps * d)) / (2 * eps)
        assert abs(grad @ d - fd) / (abs(fd) + 1e-12) < 1e-5


def test_normalization_affects_evaluation():
    mlp_a = small_mlp(seed=4, half_widths=(1.0, 1.0))
    mlp_b = small_mlp(seed=4, half_widths=(2.0, 2.0))
    x = np.array([[0.5, 0.5]])
    # same parameters, different input map: b at x equals a at x/2
    np.testing.assert_allclose(
        forward_value(mlp_b, x), forward_value(mlp_a, x / 2), atol=1e-14
    )
    jet_b = forward_jet(mlp_b, x)
    jet_a = forward_jet(mlp_a, x / 2)
    # chain rule: first derivatives scale by 1/2, second by 1/4
    np.testing.assert_allclose(jet_b.f1, jet_a.f1 / 2, atol=1e-14)
    np.testing.assert_allclose(jet_b.f11, jet_a.f11 / 4, atol=1e-14)


def test_serialization_roundtrip(tmp_path):
    mlp = small_mlp(seed=11, n_hidden=3, width=20, half_widths=(6.5, 4.0))
    base = tmp_path / "model"
    save_params(mlp, base)
    assert (tmp_path / "model.json").exists() and (tmp_path / "model.bin").exists()
    back = load_params(base)
    assert back.layer_sizes == mlp.layer_sizes
    np.testing.assert_array_equal(back.to_vector(), mlp.to_vector())  # bit-exact
    assert back.normalization == mlp.normalization
    x = np.random.default_rng(0).uniform(-4, 4, size=(10, 2))
    np.testing.assert_array_equal(forward_value(back, x), forward_value(mlp, x))


def test_set_vector_length_mismatch():
    mlp = small_mlp()
    with pytest.raises(ValueError):
        mlp.set_vector(np.zeros(mlp.n_params + 1))


def test_nonfinite_evaluation_raises():
    mlp = small_mlp()
    mlp.weights[0][0, 0] = np.inf
    with np.errstate(invalid="ignore"):
        with pytest.raises(FloatingPointError):
            forward_value(mlp, np.zeros((3, 2)))
        with pytest.raises(FloatingPointError):
            forward_jet(mlp, np.zeros((3, 2)))
