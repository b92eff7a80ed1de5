import numpy as np
import pytest

from memform import AdamState, LbfgsState, LineSearchReport, adam_step, lbfgs_step


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def naive_adam(params, grads, eta, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook bias-corrected Adam, written independently as an oracle."""
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        params = params - eta * m_hat / (np.sqrt(v_hat) + eps)
    return params


def test_adam_matches_naive_reimplementation():
    rng = np.random.default_rng(0)
    params = rng.standard_normal(20)
    grads = [rng.standard_normal(20) * 10.0 ** rng.uniform(-3, 2) for _ in range(50)]

    state = AdamState.zeros(20)
    got = params.copy()
    for g in grads:
        got = adam_step(state, got, g, 3e-3)
    want = naive_adam(params, grads, 3e-3)
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=0)
    assert state.t == 50


def test_adam_first_step_is_learning_rate_sized():
    # with zero moments, m_hat/sqrt(v_hat) = sign(g), so |step| ~ eta exactly
    eta = 1e-3
    g = np.array([3.0, -0.5, 12.0, -7.0])
    new = adam_step(AdamState.zeros(4), np.zeros(4), g, eta)
    np.testing.assert_allclose(new, -eta * np.sign(g), rtol=1e-6)


def test_adam_converges_on_quadratic_bowl():
    state = AdamState.zeros(3)
    theta = np.array([2.0, -1.5, 0.7])
    for _ in range(2000):
        theta = adam_step(state, theta, 4.0 * theta, 0.05)
    assert np.max(np.abs(theta)) <= 1e-8


def test_adam_state_mutation_and_counter():
    state = AdamState.zeros(2)
    theta = np.zeros(2)
    theta = adam_step(state, theta, np.array([1.0, 2.0]), 1e-2)
    assert state.t == 1
    np.testing.assert_allclose(state.m, 0.1 * np.array([1.0, 2.0]), rtol=1e-14)
    np.testing.assert_allclose(state.v, 0.001 * np.array([1.0, 4.0]), rtol=1e-12)


def test_adam_rejects_non_finite():
    state = AdamState.zeros(2)
    with pytest.raises(FloatingPointError):
        adam_step(state, np.zeros(2), np.array([1.0, np.nan]), 1e-3)
    with pytest.raises(FloatingPointError):
        adam_step(AdamState.zeros(1), np.array([1.0]), np.array([np.inf]), 1e-3)


# ---------------------------------------------------------------------------
# L-BFGS
# ---------------------------------------------------------------------------

def quadratic(rng, d, cond):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    a = q @ np.diag(np.logspace(0, np.log10(cond), d)) @ q.T
    b = rng.standard_normal(d)
    star = np.linalg.solve(a, b)
    f_star = 0.5 * star @ a @ star - b @ star

    def closure(theta):
        return 0.5 * theta @ a @ theta - b @ theta, a @ theta - b

    return closure, star, f_star


@pytest.mark.parametrize("d,cond", [(2, 10.0), (6, 100.0), (10, 100.0), (6, 1000.0)])
def test_lbfgs_finite_termination_on_quadratics(d, cond):
    # exact line minimization makes L-BFGS conjugate-gradient-like: d steps
    # suffice on a quadratic, d+2 leaves rounding slack
    for trial in range(5):
        rng = np.random.default_rng(1000 * d + trial)
        closure, star, f_star = quadratic(rng, d, cond)
        theta = rng.standard_normal(d) * 3.0
        state = LbfgsState()
        f, g = closure(theta)
        for _ in range(d + 2):
            theta, f, g, rep = lbfgs_step(state, theta, closure, f, g)
        assert f - f_star <= 1e-10 * (1.0 + abs(f_star))
        assert np.max(np.abs(theta - star)) <= 1e-8


def test_lbfgs_accepted_steps_satisfy_strong_wolfe():
    rng = np.random.default_rng(7)
    closure, _, _ = quadratic(rng, 8, 50.0)
    theta = rng.standard_normal(8)
    state = LbfgsState()
    f, g = closure(theta)
    n_checked = 0
    for _ in range(10):
        theta, f, g, rep = lbfgs_step(state, theta, closure, f, g)
        if rep.converged and rep.alpha > 0.0:
            armijo, curvature = rep.wolfe_satisfied(1e-4, 0.9)
            assert armijo and curvature
            n_checked += 1
    assert n_checked >= 2


def test_lbfgs_solves_rosenbrock():
    def rosen(x):
        f = (1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2
        g = np.array(
            [
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
                200.0 * (x[1] - x[0] ** 2),
            ]
        )
        return f, g

    theta = np.array([-1.2, 1.0])
    state = LbfgsState()
    f, g = rosen(theta)
    for _ in range(150):
        theta, f, g, rep = lbfgs_step(state, theta, rosen, f, g)
    assert f < 1e-12
    np.testing.assert_allclose(theta, [1.0, 1.0], atol=1e-6)


def test_lbfgs_zero_gradient_is_a_fixed_point():
    def closure(theta):
        return 0.0, np.zeros_like(theta)

    theta = np.array([1.0, 2.0])
    state = LbfgsState()
    new, f, g, rep = lbfgs_step(state, theta, closure, 0.0, np.zeros(2))
    assert new is theta
    assert rep.alpha == 0.0 and rep.converged


def test_lbfgs_stops_on_numerically_flat_ray():
    # descent measure below eps^1.5 * (1 + |f0|): no step is taken
    def closure(theta):
        return 1.0, np.full_like(theta, 1e-14)

    theta = np.zeros(4)
    state = LbfgsState()
    new, f, g, rep = lbfgs_step(state, theta, closure, 1.0, np.full(4, 1e-14))
    assert rep.alpha == 0.0 and rep.converged
    assert np.all(new == theta)


def test_curvature_pair_rejection_and_flush():
    state = LbfgsState(m=3)
    s = np.array([1.0, 0.0])
    state.push(s, np.array([0.0, 1.0]))  # s @ y == 0: rejected
    assert len(state.s_hist) == 0
    state.push(s, np.array([1.0, 0.0]))
    assert len(state.s_hist) == 1
    for k in range(5):
        state.push(np.array([1.0, float(k)]), np.array([1.0, float(k)]))
    assert len(state.s_hist) == 3  # capped at m
    state.flush()
    assert len(state.s_hist) == 0 and len(state.y_hist) == 0


def test_two_loop_recursion_matches_dense_bfgs_inverse():
    # with a single pair the recursion equals the closed-form BFGS update of
    # H0 = gamma I applied to the gradient
    rng = np.random.default_rng(11)
    s = rng.standard_normal(4)
    y = rng.standard_normal(4)
    if s @ y < 0:
        y = -y
    grad = rng.standard_normal(4)
    state = LbfgsState()
    state.push(s, y)
    got = state.direction(grad)

    gamma = (s @ y) / (y @ y)
    rho = 1.0 / (y @ s)
    eye = np.eye(4)
    h = (eye - rho * np.outer(s, y)) @ (gamma * eye) @ (eye - rho * np.outer(y, s))
    h += rho * np.outer(s, s)
    np.testing.assert_allclose(got, -h @ grad, rtol=1e-12)


def test_lbfgs_fallback_recovers_from_failed_search():
    # max_trials=1 starves the Wolfe search so the first Armijo failure ends
    # it; the steepest-descent backtracking fallback must still make progress
    def closure(theta):
        x = theta[0]
        return x ** 4, np.array([4.0 * x ** 3])

    theta = np.array([3.0])
    state = LbfgsState()
    f0, g0 = closure(theta)
    new, f, g, rep = lbfgs_step(state, theta, closure, f0, g0, max_trials=1)
    assert rep.fallback
    assert f < f0
    assert new[0] == pytest.approx(2.0)  # unit step along -g/|g|


def test_lbfgs_raises_on_non_finite_closure():
    def closure(theta):
        return np.nan, np.ones_like(theta)

    with pytest.raises(FloatingPointError):
        lbfgs_step(LbfgsState(), np.zeros(2), closure, 1.0, np.ones(2))


def test_line_search_report_wolfe_predicate():
    rep = LineSearchReport(
        alpha=1.0, f0=1.0, dphi0=-1.0, f_new=0.4, dphi_new=0.05, n_evals=1, converged=True
    )
    armijo, curvature = rep.wolfe_satisfied(1e-4, 0.9)
    assert armijo and curvature
    bad = LineSearchReport(
        alpha=1.0, f0=1.0, dphi0=-1.0, f_new=1.2, dphi_new=0.95, n_evals=1, converged=False
    )
    armijo, curvature = bad.wolfe_satisfied(1e-4, 0.9)
    assert not armijo
    assert not curvature


def test_lbfgs_line_search_is_frugal_on_quadratics():
    rng = np.random.default_rng(21)
    closure, _, _ = quadratic(rng, 6, 30.0)
    theta = rng.standard_normal(6)
    state = LbfgsState()
    f, g = closure(theta)
    total = 0
    for _ in range(8):
        theta, f, g, rep = lbfgs_step(state, theta, closure, f, g)
        total += rep.n_evals
    assert total <= 8 * 6  # a handful of evaluations per iteration, not dozens
