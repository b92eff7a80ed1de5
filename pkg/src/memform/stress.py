"""Airy stress parameterization, load models, and unilateral admissibility.

The in-plane stress state is generated by a constant-Hessian Airy function
parameterized by (l1, l2, l3) and a sign: N11 = +/- l1^2,
N22 = +/- (l2^2 + l3^2), N12 = +/- l1*l2, minus for compression-only and plus
for tension-only.  Horizontal loads shift the projected stresses through the
cumulative resultants h1 = int p1 dx1 and h2 = int p2 dx2, so sign-definiteness
of the total tensor has to be re-checked whenever horizontal loads act.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr  # standard normal CDF, vectorized

from .geometry import DomainSpec, sample_interior, as_rng

__all__ = [
    "AiryField",
    "PointLoad",
    "LoadModel",
    "AdmissibilityReport",
    "stress_components",
    "airy_eval",
    "vertical_load",
    "horizontal_loads",
    "cumulative_loads",
    "projected_stresses",
    "check_admissibility",
]


@dataclass(frozen=True)
class AiryField:
    """Constant-Hessian Airy stress parameters."""

    l1: float
    l2: float
    l3: float
    sign: str = "compression"  # 'compression' | 'tension'
    centroid: tuple[float, float] = (0.0, 0.0)
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        if self.sign not in ("compression", "tension"):
            raise ValueError("sign must be 'compression' or 'tension'")

    @property
    def sign_factor(self) -> float:
        return -1.0 if self.sign == "compression" else 1.0


def stress_components(airy: AiryField) -> tuple[float, float, float]:
    """Signed constant stress components (N11, N22, N12)."""
    s = airy.sign_factor
    return (
        s * airy.l1**2,
        s * (airy.l2**2 + airy.l3**2),
        s * airy.l1 * airy.l2,
    )


def airy_eval(airy: AiryField, p) -> np.ndarray | float:
    """Quadratic Airy function centered at the planform centroid.

    Phi = 1/2 N22 (x1-x1c)^2 + 1/2 N11 (x2-x2c)^2 - N12 (x1-x1c)(x2-x2c)
          + c0 + c1 x1 + c2 x2
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    n11, n22, n12 = stress_components(airy)
    u = pts[:, 0] - airy.centroid[0]
    v = pts[:, 1] - airy.centroid[1]
    phi = (
        0.5 * n22 * u * u
        + 0.5 * n11 * v * v
        - n12 * u * v
        + airy.c0
        + airy.c1 * pts[:, 0]
        + airy.c2 * pts[:, 1]
    )
    return float(phi[0]) if single else phi


@dataclass(frozen=True)
class PointLoad:
    """Concentrated vertical load regularized to a plan Gaussian of spread sigma."""

    P: float
    center: tuple[float, float]
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class LoadModel:
    """Self-weight, regularized point loads, and pseudo-static horizontal action.

    Horizontal components are proportional to the total vertical load:
    p1 = alpha_h cos(theta_h) q and p2 = alpha_h sin(theta_h) q.  The cumulative
    resultants integrate from ``ref``; the domain centroid (the origin for all
    supported domains) is the default anchor and is user-overridable.
    """

    rho: float = 0.0
    t: float = 0.1
    point_loads: tuple[PointLoad, ...] = ()
    alpha_h: float = 0.0
    theta_h: float = 0.0
    ref: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rho < 0 or self.t <= 0 or self.alpha_h < 0:
            raise ValueError("need rho >= 0, t > 0, alpha_h >= 0")

    @property
    def lambdas(self) -> tuple[float, float]:
        return (
            self.alpha_h * np.cos(self.theta_h),
            self.alpha_h * np.sin(self.theta_h),
        )

    @property
    def self_weight(self) -> float:
        return self.rho * self.t


def _as_points(p):
    p = np.asarray(p, dtype=float)
    return (p.ndim == 1), np.atleast_2d(p)


def vertical_load(loads: LoadModel, p):
    """q = rho*t + sum_j P_j/(2 pi sigma_j^2) exp(-|p - c_j|^2 / (2 sigma_j^2)), positive down."""
    single, pts = _as_points(p)
    q = np.full(pts.shape[0], loads.self_weight)
    for pl in loads.point_loads:
        d2 = (pts[:, 0] - pl.center[0]) ** 2 + (pts[:, 1] - pl.center[1]) ** 2
        q = q + pl.P / (2.0 * np.pi * pl.sigma**2) * np.exp(-d2 / (2.0 * pl.sigma**2))
    return float(q[0]) if single else q


def horizontal_loads(loads: LoadModel, p):
    """(p1, p2) = (lambda1 q, lambda2 q)."""
    lam1, lam2 = loads.lambdas
    q = vertical_load(loads, p)
    return lam1 * q, lam2 * q


def _gauss_1d_pdf(u, sigma):
    return np.exp(-u * u / (2.0 * sigma**2)) / (np.sqrt(2.0 * np.pi) * sigma)


def cumulative_loads(loads: LoadModel, p):
    """Closed-form (h1, h2) with h1 = int_{x1ref}^{x1} p1 ds, h2 = int_{x2ref}^{x2} p2 ds.

    The self-weight part integrates linearly; each Gaussian load contributes
    lambda * P * (1D Gaussian pdf in the transverse coordinate) * (1D Gaussian
    CDF difference along the integration coordinate).
    """
    single, pts = _as_points(p)
    lam1, lam2 = loads.lambdas
    x1, x2 = pts[:, 0], pts[:, 1]
    x1r, x2r = loads.ref
    sw = loads.self_weight
    h1 = lam1 * sw * (x1 - x1r)
    h2 = lam2 * sw * (x2 - x2r)
    for pl in loads.point_loads:
        c1, c2, s = pl.center[0], pl.center[1], pl.sigma
        cdf1 = ndtr((x1 - c1) / s) - ndtr((x1r - c1) / s)
        cdf2 = ndtr((x2 - c2) / s) - ndtr((x2r - c2) / s)
        h1 = h1 + lam1 * pl.P * _gauss_1d_pdf(x2 - c2, s) * cdf1
        h2 = h2 + lam2 * pl.P * _gauss_1d_pdf(x1 - c1, s) * cdf2
    if single:
        return float(h1[0]), float(h2[0])
    return h1, h2


def projected_stresses(airy: AiryField, loads: LoadModel, p):
    """(S11, S22, S12) = (N11 - h2, N22 - h1, N12)."""
    single, pts = _as_points(p)
    n11, n22, n12 = stress_components(airy)
    h1, h2 = cumulative_loads(loads, pts)
    s11 = n11 - np.asarray(h2)
    s22 = n22 - np.asarray(h1)
    s12 = np.full_like(s11, n12)
    if single:
        return float(s11[0]), float(s22[0]), float(s12[0])
    return s11, s22, s12


@dataclass
class AdmissibilityReport:
    passed: bool
    sign: str
    worst_margin: float
    worst_point: tuple[float, float]
    n_samples: int
    seed: int | None

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "sign": self.sign,
            "worst_margin": float(self.worst_margin),
            "worst_point": [float(self.worst_point[0]), float(self.worst_point[1])],
            "n_samples": int(self.n_samples),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def admissibility_margins(s11, s22, s12, sign: str):
    """Per-sample margins; all three must be >= 0 for an admissible state.

    Tension: (S11, S22, det).  Compression: (-S11, -S22, det).  det is the
    determinant S11*S22 - S12^2 in both states.
    """
    det = s11 * s22 - s12 * s12
    flip = -1.0 if sign == "compression" else 1.0
    return np.stack([flip * s11, flip * s22, det])


def check_admissibility(
    airy: AiryField,
    loads: LoadModel,
    domain: DomainSpec,
    n_samples: int,
    rng,
    seed_label: int | None = None,
) -> AdmissibilityReport:
    """Verify sign-definiteness of the total projected stress tensor on samples.

    Failure is reported, not raised.  The worst margin is the most negative of
    the three per-sample inequalities; its location is returned for diagnosis.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    rng = as_rng(rng)
    cloud = sample_interior(domain, n_samples, rng)
    s11, s22, s12 = projected_stresses(airy, loads, cloud.x)
    margins = admissibility_margins(s11, s22, s12, airy.sign)
    per_point = margins.min(axis=0)
    worst_idx = int(np.argmin(per_point))
    worst = float(per_point[worst_idx])
    return AdmissibilityReport(
        passed=worst >= 0.0,
        sign=airy.sign,
        worst_margin=worst,
        worst_point=(float(cloud.x[worst_idx, 0]), float(cloud.x[worst_idx, 1])),
        n_samples=n_samples,
        seed=seed_label,
    )
