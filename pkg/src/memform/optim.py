"""Full-batch optimizers for the two-stage training protocol.

Stage 1 uses bias-corrected Adam with a constant learning rate; Stage 2 uses
L-BFGS with a strong Wolfe line search (two-loop recursion over the m most
recent curvature pairs).  Both operate on the flat parameter vector and know
nothing about networks: the caller supplies gradients (Adam) or a
re-evaluable loss-and-gradient closure (L-BFGS).

The line search brackets and zooms with safeguarded cubic interpolation, then
polishes any Wolfe-acceptable point with secant steps toward the exact
one-dimensional minimizer.  The polish is what gives quadratic termination:
on a quadratic objective one secant step lands on the line minimizer, so
L-BFGS inherits the conjugate-gradient finite-termination property instead of
stalling on loosely accepted unit steps (c2 = 0.9 accepts almost anything).
Polish candidates are only adopted while they keep satisfying both Wolfe
inequalities, so every accepted step remains a strong Wolfe point.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AdamState",
    "adam_step",
    "LbfgsState",
    "LineSearchReport",
    "lbfgs_step",
]


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """First/second moment estimates and step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(np.zeros(n), np.zeros(n), 0)


def adam_step(
    state: AdamState,
    params: np.ndarray,
    grad: np.ndarray,
    eta: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """One bias-corrected Adam update; mutates state, returns new parameters."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient: optimization diverged")
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    new = params - eta * m_hat / (np.sqrt(v_hat) + eps)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("non-finite parameters: optimization diverged")
    return new


# ---------------------------------------------------------------------------
# L-BFGS with strong Wolfe line search
# ---------------------------------------------------------------------------

@dataclass
class LbfgsState:
    """Curvature-pair history for the two-loop recursion."""

    m: int = 50
    s_hist: deque = field(default_factory=deque)
    y_hist: deque = field(default_factory=deque)

    def flush(self) -> None:
        """Drop all stored pairs (objective changed, e.g. after a resample)."""
        self.s_hist.clear()
        self.y_hist.clear()

    def push(self, s: np.ndarray, y: np.ndarray) -> None:
        # reject pairs with negligible curvature: they would poison the
        # inverse-Hessian model and can make rho overflow
        if s @ y <= 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            return
        self.s_hist.append(s)
        self.y_hist.append(y)
        while len(self.s_hist) > self.m:
            self.s_hist.popleft()
            self.y_hist.popleft()

    def direction(self, grad: np.ndarray) -> np.ndarray:
        """Two-loop recursion: -H*grad with H0 = gamma*I (Barzilai-Borwein scale)."""
        q = grad.copy()
        alphas = []
        for s, y in zip(reversed(self.s_hist), reversed(self.y_hist)):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if self.s_hist:
            s, y = self.s_hist[-1], self.y_hist[-1]
            q *= (s @ y) / (y @ y)
        for (s, y), a in zip(zip(self.s_hist, self.y_hist), reversed(alphas)):
            b = (y @ q) / (y @ s)
            q += (a - b) * s
        return -q


@dataclass
class LineSearchReport:
    """Outcome of one line search, enough to re-verify the Wolfe conditions."""

    alpha: float
    f0: float
    dphi0: float
    f_new: float
    dphi_new: float
    n_evals: int
    converged: bool
    fallback: bool = False

    def wolfe_satisfied(self, c1: float, c2: float) -> tuple[bool, bool]:
        armijo = self.f_new <= self.f0 + c1 * self.alpha * self.dphi0
        curvature = abs(self.dphi_new) <= -c2 * self.dphi0
        return armijo, curvature


def _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    """Minimizer of the cubic Hermite interpolant, clipped inside the bracket."""
    lo, hi = (a_lo, a_hi) if a_lo < a_hi else (a_hi, a_lo)
    width = hi - lo
    mid = 0.5 * (lo + hi)
    if width <= 0.0:
        return mid
    d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    disc = d1 * d1 - d_lo * d_hi
    if disc < 0.0:
        return mid
    d2 = np.sign(a_hi - a_lo) * np.sqrt(disc)
    denom = d_hi - d_lo + 2.0 * d2
    if denom == 0.0:
        return mid
    a = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom
    if not np.isfinite(a):
        return mid
    margin = 0.05 * width  # keep strictly interior so the bracket shrinks
    return float(np.clip(a, lo + margin, hi - margin))


class _Phi:
    """Restriction of the closure to the ray params + alpha*d, with eval count."""

    def __init__(self, closure, params, d):
        self.closure = closure
        self.params = params
        self.d = d
        self.n_evals = 0

    def __call__(self, alpha: float):
        f, g = self.closure(self.params + alpha * self.d)
        f = float(f)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise FloatingPointError("non-finite loss or gradient: optimization diverged")
        self.n_evals += 1
        return f, float(g @ self.d), g


def _strong_wolfe(phi, f0, dphi0, c1, c2, alpha0, max_trials, polish_tol=1e-4):
    """Bracket/zoom strong Wolfe search; returns (alpha, f, dphi, g, converged).

    Any acceptable point is polished with up to three secant steps toward
    phi' = 0, keeping only candidates that still satisfy both conditions and
    do not increase phi.
    """

    def acceptable(a, f, dphi):
        return f <= f0 + c1 * a * dphi0 and abs(dphi) <= -c2 * dphi0

    def polish(a, f, dphi, g):
        a_prev, dphi_prev = 0.0, dphi0
        for _ in range(3):
            if abs(dphi) <= polish_tol * abs(dphi0):
                break
            denom = dphi - dphi_prev
            if denom == 0.0:
                break
            a_new = a - dphi * (a - a_prev) / denom
            if not np.isfinite(a_new) or a_new <= 0.0:
                break
            f_new, dphi_new, g_new = phi(a_new)
            if not (acceptable(a_new, f_new, dphi_new) and f_new <= f):
                break
            a_prev, dphi_prev = a, dphi
            a, f, dphi, g = a_new, f_new, dphi_new, g_new
        return a, f, dphi, g, True

    def zoom(a_lo, f_lo, d_lo, g_lo, a_hi, f_hi, d_hi):
        while phi.n_evals < max_trials:
            a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            f, dphi, g = phi(a)
            if f > f0 + c1 * a * dphi0 or f >= f_lo:
                a_hi, f_hi, d_hi = a, f, dphi
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return polish(a, f, dphi, g)
                if dphi * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, d_lo, g_lo = a, f, dphi, g
        # bracket exhausted: a_lo is the best Armijo point found, Wolfe unproven
        return a_lo, f_lo, d_lo, g_lo, False

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, dphi0, None
    a = alpha0
    first = True
    while phi.n_evals < max_trials:
        f, dphi, g = phi(a)
        if f > f0 + c1 * a * dphi0 or (not first and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, g_prev, a, f, dphi)
        if abs(dphi) <= -c2 * dphi0:
            return polish(a, f, dphi, g)
        if dphi >= 0.0:
            return zoom(a, f, dphi, g, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev, g_prev = a, f, dphi, g
        a *= 2.0
        first = False
    return a_prev, f_prev, d_prev, g_prev, False


def _backtrack(phi, f0, dphi0, c1, max_trials):
    """Armijo-only backtracking along the current ray (fallback search)."""
    a = 1.0
    for _ in range(max_trials):
        f, dphi, g = phi(a)
        if f <= f0 + c1 * a * dphi0:
            return a, f, dphi, g, True
        a *= 0.5
    return 0.0, f0, dphi0, None, False


def lbfgs_step(
    state: LbfgsState,
    params: np.ndarray,
    closure,
    f0: float,
    grad0: np.ndarray,
    c1: float = 1e-4,
    c2: float = 0.9,
    alpha0: float = 1.0,
    max_trials: int = 25,
):
    """One L-BFGS iteration.

    ``closure(params) -> (loss, grad)``; f0/grad0 are its values at ``params``
    (so each iteration costs line-search evaluations only).  Returns
    ``(new_params, f_new, grad_new, report)`` and pushes the new curvature
    pair.  On line-search failure the history is flushed and a backtracking
    steepest-descent step is tried; if that also fails the parameters are
    returned unchanged.
    """
    grad0 = np.asarray(grad0, dtype=float)
    gnorm = np.linalg.norm(grad0)
    if gnorm == 0.0:
        report = LineSearchReport(0.0, f0, 0.0, f0, 0.0, 0, True)
        return params, f0, grad0, report

    d = state.direction(grad0)
    dphi0 = float(grad0 @ d)
    if dphi0 >= 0.0:  # stale history produced a non-descent direction
        state.flush()
        d = -grad0
        dphi0 = -gnorm * gnorm
    if -dphi0 <= np.finfo(float).eps ** 1.5 * (1.0 + abs(f0)):
        # descent available along the ray is below double-precision resolution:
        # already at a numerical minimizer, Wolfe holds trivially at alpha = 0
        report = LineSearchReport(0.0, f0, dphi0, f0, dphi0, 0, True)
        return params, f0, grad0, report

    phi = _Phi(closure, params, d)
    a, f, dphi, g, ok = _strong_wolfe(phi, f0, dphi0, c1, c2, alpha0, max_trials)
    fallback = False
    if not ok and f >= f0:
        # no progress along the quasi-Newton ray: restart from steepest descent
        fallback = True
        state.flush()
        d = -grad0 / gnorm
        dphi0 = -gnorm
        phi = _Phi(closure, params, d)
        a, f, dphi, g, ok = _backtrack(phi, f0, dphi0, c1, max_trials)
        if not ok:
            report = LineSearchReport(0.0, f0, dphi0, f0, dphi0, phi.n_evals, False, True)
            return params, f0, grad0, report

    new_params = params + a * d
    state.push(a * d, g - grad0)
    report = LineSearchReport(a, f0, dphi0, f, dphi, phi.n_evals, ok, fallback)
    return new_params, f, g, report
