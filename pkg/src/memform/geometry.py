"""Plan domains, boundary height profiles, and collocation sampling.

Three plan geometries are supported: an l-by-b rectangle, a disk of radius R,
and an annulus R_in < r < R_out, all centered at the origin.  Boundary heights
are a raised-cosine arch for the rectangle and truncated Fourier series in the
polar angle for the circular kinds.  Leg-type geometries (three-legged,
four-legged) are a full annulus/disk in plan; the legs come entirely from the
Fourier boundary profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainSpec",
    "BoundaryProfile",
    "FourierProfile",
    "PointCloud",
    "as_rng",
    "contains",
    "sample_interior",
    "sample_boundary_uniform",
    "sample_boundary_curvature",
    "boundary_height",
    "boundary_points_from_params",
]

# denser than 4096 so the inverse-CDF bias stays below statistical noise
_CURV_GRID = 8192


def as_rng(rng) -> np.random.Generator:
    """Accept an int seed or a Generator and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class DomainSpec:
    """Plan geometry: kind is one of 'rectangle', 'disk', 'annulus'."""

    kind: str
    l: float = 0.0
    b: float = 0.0
    R: float = 0.0
    R_in: float = 0.0
    R_out: float = 0.0

    def __post_init__(self):
        if self.kind == "rectangle":
            if not (self.l > 0 and self.b > 0):
                raise ValueError("rectangle needs l > 0 and b > 0")
        elif self.kind == "disk":
            if not self.R > 0:
                raise ValueError("disk needs R > 0")
        elif self.kind == "annulus":
            if not (0 < self.R_in < self.R_out):
                raise ValueError("annulus needs 0 < R_in < R_out")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @staticmethod
    def rectangle(l: float, b: float) -> "DomainSpec":
        return DomainSpec("rectangle", l=l, b=b)

    @staticmethod
    def disk(R: float) -> "DomainSpec":
        return DomainSpec("disk", R=R)

    @staticmethod
    def annulus(R_in: float, R_out: float) -> "DomainSpec":
        return DomainSpec("annulus", R_in=R_in, R_out=R_out)

    @property
    def characteristic_size(self) -> float:
        if self.kind == "rectangle":
            return max(self.l, self.b)
        if self.kind == "disk":
            return 2.0 * self.R
        return 2.0 * self.R_out

    @property
    def bounding_half_widths(self) -> tuple[float, float]:
        if self.kind == "rectangle":
            return self.l / 2.0, self.b / 2.0
        r = self.R if self.kind == "disk" else self.R_out
        return r, r

    def perimeter(self) -> float:
        if self.kind == "rectangle":
            return 2.0 * (self.l + self.b)
        if self.kind == "disk":
            return 2.0 * np.pi * self.R
        return 2.0 * np.pi * (self.R_in + self.R_out)


@dataclass(frozen=True)
class FourierProfile:
    """Truncated Fourier series g(theta) = a0 + sum_k a_k cos(k theta) + b_k sin(k theta)."""

    a0: float
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()

    def __post_init__(self):
        na, nb = len(self.a), len(self.b)
        if na != nb:
            # pad the shorter side so both run to the same harmonic order
            k = max(na, nb)
            object.__setattr__(self, "a", tuple(self.a) + (0.0,) * (k - na))
            object.__setattr__(self, "b", tuple(self.b) + (0.0,) * (k - nb))
        if not np.all(np.isfinite([self.a0, *self.a, *self.b])):
            raise ValueError("non-finite Fourier coefficient")

    @property
    def order(self) -> int:
        return len(self.a)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        g = np.full_like(theta, self.a0)
        for k in range(1, self.order + 1):
            g = g + self.a[k - 1] * np.cos(k * theta) + self.b[k - 1] * np.sin(k * theta)
        return g

    def curvature(self, theta):
        """Second theta-derivative of the profile."""
        theta = np.asarray(theta, dtype=float)
        kap = np.zeros_like(theta)
        for k in range(1, self.order + 1):
            kap = kap - k * k * (
                self.a[k - 1] * np.cos(k * theta) + self.b[k - 1] * np.sin(k * theta)
            )
        return kap

    @property
    def sup_norm_bound(self) -> float:
        return abs(self.a0) + sum(abs(c) for c in self.a) + sum(abs(c) for c in self.b)


@dataclass(frozen=True)
class BoundaryProfile:
    """Boundary height data for a domain.

    rectangle: raised-cosine arch of height h_arch along the long edges.
    disk: one Fourier series.  annulus: outer and inner Fourier series.
    """

    kind: str
    h_arch: float = 0.0
    fourier: FourierProfile | None = None
    fourier_inner: FourierProfile | None = None

    @staticmethod
    def rect_arch(h_arch: float) -> "BoundaryProfile":
        return BoundaryProfile("rectangle", h_arch=h_arch)

    @staticmethod
    def disk_fourier(profile: FourierProfile) -> "BoundaryProfile":
        return BoundaryProfile("disk", fourier=profile)

    @staticmethod
    def annulus_fourier(outer: FourierProfile, inner: FourierProfile) -> "BoundaryProfile":
        return BoundaryProfile("annulus", fourier=outer, fourier_inner=inner)

    @property
    def sup_norm_bound(self) -> float:
        if self.kind == "rectangle":
            return abs(self.h_arch)
        bound = self.fourier.sup_norm_bound
        if self.fourier_inner is not None:
            bound = max(bound, self.fourier_inner.sup_norm_bound)
        return bound


@dataclass
class PointCloud:
    """Batch of plan points with a tag and, for boundary points, the boundary parameter.

    For circular boundaries the parameter is the polar angle; for the rectangle
    it is the arc length measured counterclockwise from (-l/2, -b/2).  For the
    annulus, ``ring`` distinguishes outer (+1) from inner (-1) circle points.
    """

    x: np.ndarray  # (n, 2)
    tag: str  # 'interior' | 'boundary'
    param: np.ndarray | None = None  # (n,) boundary parameter
    ring: np.ndarray | None = None  # (n,) +1 outer / -1 inner, annulus only

    def __len__(self) -> int:
        return self.x.shape[0]

    def to_csv(self, path) -> None:
        n = len(self)
        param = self.param if self.param is not None else np.full(n, np.nan)
        rows = np.column_stack([self.x, param])
        with open(path, "w") as fh:
            fh.write("x1,x2,tag,param\n")
            for (x1, x2, p) in rows:
                fh.write(f"{float(x1)!r},{float(x2)!r},{self.tag},{float(p)!r}\n")


def contains(domain: DomainSpec, p) -> bool | np.ndarray:
    """Strict interior test (boundary excluded).  Accepts one point or an (n,2) batch."""
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = np.atleast_2d(p)
    x1, x2 = pts[:, 0], pts[:, 1]
    if domain.kind == "rectangle":
        inside = (np.abs(x1) < domain.l / 2.0) & (np.abs(x2) < domain.b / 2.0)
    elif domain.kind == "disk":
        inside = x1 * x1 + x2 * x2 < domain.R**2
    else:
        r2 = x1 * x1 + x2 * x2
        inside = (r2 > domain.R_in**2) & (r2 < domain.R_out**2)
    return bool(inside[0]) if single else inside


def sample_interior(domain: DomainSpec, n: int, rng) -> PointCloud:
    """n i.i.d. uniform points over the domain area.

    Disk uses the exact polar (sqrt) transform; rectangle is direct; annulus
    uses rejection from the bounding square.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = as_rng(rng)
    if domain.kind == "rectangle":
        u = rng.random((n, 2))
        pts = np.column_stack([(u[:, 0] - 0.5) * domain.l, (u[:, 1] - 0.5) * domain.b])
    elif domain.kind == "disk":
        r = domain.R * np.sqrt(rng.random(n))
        th = 2.0 * np.pi * rng.random(n)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    else:
        pts = np.empty((0, 2))
        half = domain.R_out
        # acceptance ratio pi (R_out^2 - R_in^2) / (2 R_out)^2
        while pts.shape[0] < n:
            m = max(64, int(1.6 * (n - pts.shape[0]) / max(_annulus_acceptance(domain), 1e-9)))
            cand = (rng.random((m, 2)) - 0.5) * (2.0 * half)
            keep = contains(domain, cand)
            pts = np.vstack([pts, cand[keep]])
        pts = pts[:n]
    return PointCloud(pts, "interior")


def _annulus_acceptance(domain: DomainSpec) -> float:
    return np.pi * (domain.R_out**2 - domain.R_in**2) / (2.0 * domain.R_out) ** 2


def sample_boundary_uniform(domain: DomainSpec, n: int, rng) -> PointCloud:
    """n points uniform in arc length over the boundary.

    For the annulus the split between outer and inner circle is multinomial
    with probabilities proportional to the circumferences.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = as_rng(rng)
    if domain.kind == "rectangle":
        s = rng.random(n) * domain.perimeter()
        pts, _ = _rect_boundary_from_arclength(domain, s)
        return PointCloud(pts, "boundary", param=s)
    if domain.kind == "disk":
        th = 2.0 * np.pi * rng.random(n)
        pts = domain.R * np.column_stack([np.cos(th), np.sin(th)])
        return PointCloud(pts, "boundary", param=th)
    frac_out = domain.R_out / (domain.R_in + domain.R_out)
    on_outer = rng.random(n) < frac_out
    th = 2.0 * np.pi * rng.random(n)
    radius = np.where(on_outer, domain.R_out, domain.R_in)
    pts = np.column_stack([radius * np.cos(th), radius * np.sin(th)])
    ring = np.where(on_outer, 1, -1)
    return PointCloud(pts, "boundary", param=th, ring=ring)


def _rect_boundary_from_arclength(domain: DomainSpec, s: np.ndarray):
    """Map arc length (ccw from the lower-left corner) to rectangle boundary points."""
    l, b = domain.l, domain.b
    s = np.mod(s, 2.0 * (l + b))
    x1 = np.empty_like(s)
    x2 = np.empty_like(s)
    edge = np.empty(s.shape, dtype=int)
    bottom = s < l
    right = (s >= l) & (s < l + b)
    top = (s >= l + b) & (s < 2 * l + b)
    left = s >= 2 * l + b
    x1[bottom] = -l / 2 + s[bottom]
    x2[bottom] = -b / 2
    x1[right] = l / 2
    x2[right] = -b / 2 + (s[right] - l)
    x1[top] = l / 2 - (s[top] - l - b)
    x2[top] = b / 2
    x1[left] = -l / 2
    x2[left] = b / 2 - (s[left] - 2 * l - b)
    edge[bottom], edge[right], edge[top], edge[left] = 0, 1, 2, 3
    return np.column_stack([x1, x2]), edge


def _curvature_density(profile: FourierProfile, theta: np.ndarray) -> np.ndarray:
    kap = np.abs(profile.curvature(theta))
    peak = kap.max()
    if peak == 0.0:
        return np.ones_like(theta)
    return 1.0 + kap / peak


def curvature_density_cdf(profile: FourierProfile, n_grid: int = _CURV_GRID):
    """Normalized discrete CDF of p(theta) on [0, 2 pi); endpoint is exactly 1."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_grid + 1)
    dens = _curvature_density(profile, theta)
    mass = 0.5 * (dens[:-1] + dens[1:]) * np.diff(theta)
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return theta, cdf


def sample_boundary_curvature(
    domain: DomainSpec, profile: BoundaryProfile, n: int, rng
) -> PointCloud:
    """n boundary points drawn from 1 + |kappa|/max|kappa| via inverse CDF.

    Applies to disk and annulus only.  On the annulus the density is built from
    the outer profile and points are placed on the outer circle.  A flat
    profile (kappa identically 0) degrades to uniform sampling.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if domain.kind == "rectangle":
        raise ValueError("curvature-weighted sampling is defined for circular domains only")
    rng = as_rng(rng)
    fourier = profile.fourier
    theta_grid, cdf = curvature_density_cdf(fourier)
    u = rng.random(n)
    th = np.interp(u, cdf, theta_grid)
    radius = domain.R if domain.kind == "disk" else domain.R_out
    pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    ring = None if domain.kind == "disk" else np.ones(n, dtype=int)
    return PointCloud(pts, "boundary", param=th, ring=ring)


def boundary_height(domain: DomainSpec, profile: BoundaryProfile, cloud: PointCloud) -> np.ndarray:
    """Prescribed height at each boundary point of the cloud."""
    if cloud.tag != "boundary":
        raise ValueError("boundary_height expects a boundary cloud")
    if domain.kind == "rectangle":
        # the arch expression depends on x1 only and vanishes at x1 = +/- l/2,
        # so the one formula covers all four edges
        x1 = cloud.x[:, 0]
        return 0.5 * profile.h_arch * (1.0 + np.cos(np.pi * x1 / (domain.l / 2.0)))
    theta = cloud.param
    if domain.kind == "disk":
        return profile.fourier.value(theta)
    values = np.empty(len(cloud))
    outer = cloud.ring > 0
    values[outer] = profile.fourier.value(theta[outer])
    values[~outer] = profile.fourier_inner.value(theta[~outer])
    return values


def boundary_points_from_params(domain: DomainSpec, param: np.ndarray, ring=None) -> PointCloud:
    """Build an exact boundary cloud from parameters (angle or arc length)."""
    param = np.asarray(param, dtype=float)
    if domain.kind == "rectangle":
        pts, _ = _rect_boundary_from_arclength(domain, param)
        return PointCloud(pts, "boundary", param=param)
    if domain.kind == "disk":
        pts = domain.R * np.column_stack([np.cos(param), np.sin(param)])
        return PointCloud(pts, "boundary", param=param)
    ring = np.asarray(ring if ring is not None else np.ones(param.shape, dtype=int))
    radius = np.where(ring > 0, domain.R_out, domain.R_in)
    pts = np.column_stack([radius * np.cos(param), radius * np.sin(param)])
    return PointCloud(pts, "boundary", param=param, ring=ring)
