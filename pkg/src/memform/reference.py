"""Ground-truth oracles: rectangular finite differences and manufactured solutions.

The finite-difference solver discretizes the equilibrium PDE on the rectangle
with second-order central stencils (a 4-point cross for the mixed term),
replaces boundary rows with the identity, and solves the sparse system
directly.  A coarse companion solve yields a Richardson error estimate with
every reference solution.

Manufactured cases pick a closed-form f* with closed-form jets and define the
forcing q* = S11 f*,22 + S22 f*,11 + 2 S12 f*,12 - p1 f*,1 - p2 f*,2, so f*
solves the PDE exactly under the supplied stress field and horizontal loads.
On circular domains the boundary trace is re-expanded as a Fourier series
(projection order K=16) so it can drive the same profile machinery as real
cases; the projection error is reported and stays at roundoff for the
band-limited catalog entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from .geometry import (
    BoundaryProfile,
    DomainSpec,
    FourierProfile,
    PointCloud,
    as_rng,
    boundary_height,
    sample_interior,
)
from .residual import Jet, PhysicalContext
from .stress import AiryField, LoadModel, horizontal_loads, projected_stresses

__all__ = [
    "GridSolution",
    "ManufacturedCase",
    "ManufacturedContext",
    "CompareMetrics",
    "fd_solve",
    "fd_solve_rectangle",
    "make_manufactured",
    "MANUFACTURED_CHOICES",
    "compare_fields",
    "comparison_cloud",
]

_PROJECTION_K = 16
_PROJECTION_GRID = 4096


# ---------------------------------------------------------------------------
# finite differences on the rectangle
# ---------------------------------------------------------------------------

@dataclass
class GridSolution:
    """Nodal solution on the tensor grid x1 (nx) by x2 (ny), f shape (nx, ny)."""

    domain: DomainSpec
    x1: np.ndarray
    x2: np.ndarray
    f: np.ndarray
    algebraic_residual: float
    richardson_rel_error: float | None = None

    def __post_init__(self):
        self._spline = RectBivariateSpline(self.x1, self.x2, self.f, kx=3, ky=3)

    def value(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self._spline(x[:, 0], x[:, 1], grid=False)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x1,x2,f\n")
            for i, xi in enumerate(self.x1):
                for j, yj in enumerate(self.x2):
                    # repr(float(.)) round-trips bit-exactly; np scalars do not
                    fh.write(f"{float(xi)!r},{float(yj)!r},{float(self.f[i, j])!r}\n")


def _grid_points(x1, x2):
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    return np.column_stack([X1.ravel(), X2.ravel()])


def fd_solve(domain: DomainSpec, context, boundary_fn, nx: int, ny: int) -> GridSolution:
    """Solve the PDE on the rectangle grid with Dirichlet data from boundary_fn.

    ``context.coefficients(x)`` supplies (S11, S22, S12, p1, p2, q);
    ``boundary_fn(x)`` the boundary heights.  Raises on loss of ellipticity
    (singular or inaccurate solve) with the worst tensor-determinant node.
    """
    if domain.kind != "rectangle":
        raise ValueError("the finite-difference solver covers rectangles only")
    if nx < 5 or ny < 5:
        raise ValueError("need nx, ny >= 5")
    x1 = np.linspace(-domain.l / 2.0, domain.l / 2.0, nx)
    x2 = np.linspace(-domain.b / 2.0, domain.b / 2.0, ny)
    hx, hy = x1[1] - x1[0], x2[1] - x2[0]
    pts = _grid_points(x1, x2)
    S11, S22, S12, p1, p2, q = context.coefficients(pts)

    def node(i, j):
        return i * ny + j

    ii, jj = np.meshgrid(np.arange(1, nx - 1), np.arange(1, ny - 1), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    rows_idx = node(ii, jj)
    c11 = S22[rows_idx] / hx**2  # multiplies f,11 stencil
    c22 = S11[rows_idx] / hy**2
    c12 = 2.0 * S12[rows_idx] / (4.0 * hx * hy)
    c1 = -p1[rows_idx] / (2.0 * hx)
    c2 = -p2[rows_idx] / (2.0 * hy)

    entries = [
        (node(ii, jj), -2.0 * c11 - 2.0 * c22),
        (node(ii + 1, jj), c11 + c1),
        (node(ii - 1, jj), c11 - c1),
        (node(ii, jj + 1), c22 + c2),
        (node(ii, jj - 1), c22 - c2),
        (node(ii + 1, jj + 1), c12),
        (node(ii - 1, jj - 1), c12),
        (node(ii + 1, jj - 1), -c12),
        (node(ii - 1, jj + 1), -c12),
    ]
    row_list = [rows_idx] * len(entries)
    col_list = [cols for cols, _ in entries]
    val_list = [vals for _, vals in entries]

    n_nodes = nx * ny
    boundary_mask = np.zeros((nx, ny), dtype=bool)
    boundary_mask[0, :] = boundary_mask[-1, :] = True
    boundary_mask[:, 0] = boundary_mask[:, -1] = True
    bidx = np.flatnonzero(boundary_mask.ravel())
    row_list.append(bidx)
    col_list.append(bidx)
    val_list.append(np.ones(bidx.size))

    A = coo_matrix(
        (np.concatenate(val_list), (np.concatenate(row_list), np.concatenate(col_list))),
        shape=(n_nodes, n_nodes),
    ).tocsr()
    rhs = np.zeros(n_nodes)
    rhs[rows_idx] = q[rows_idx]
    rhs[bidx] = np.asarray(boundary_fn(pts[bidx]), dtype=float)

    sol = spsolve(A, rhs)
    resid = A @ sol - rhs
    rel = float(np.linalg.norm(resid) / max(np.linalg.norm(rhs), 1e-300))
    if not np.all(np.isfinite(sol)) or rel > 1e-10:
        det = S11 * S22 - S12 * S12
        worst = int(np.argmin(det))
        raise RuntimeError(
            "finite-difference solve failed (relative residual "
            f"{rel:.3e}); ellipticity worst at {tuple(pts[worst])} with "
            f"S11*S22-S12^2 = {det[worst]:.3e}"
        )
    f = sol.reshape(nx, ny)
    # pin the Dirichlet rows exactly; the direct solve leaves them at roundoff
    f.ravel()[bidx] = rhs[bidx]
    return GridSolution(domain, x1, x2, f, rel)


def fd_solve_rectangle(
    domain: DomainSpec,
    airy: AiryField,
    loads: LoadModel,
    profile: BoundaryProfile,
    nx: int,
    ny: int,
    estimate_error: bool = True,
) -> GridSolution:
    """Reference solve of a physical rectangle case, with Richardson estimate.

    The estimate compares against a half-resolution solve: for a second-order
    scheme the true error of the fine grid is about a third of the
    coarse-to-fine difference.
    """
    context = PhysicalContext(airy, loads)

    def boundary_fn(x):
        cloud = PointCloud(np.atleast_2d(x), "boundary")
        return boundary_height(domain, profile, cloud)

    fine = fd_solve(domain, context, boundary_fn, nx, ny)
    if estimate_error and nx >= 9 and ny >= 9:
        coarse = fd_solve(domain, context, boundary_fn, (nx + 1) // 2, (ny + 1) // 2)
        pts = _grid_points(coarse.x1, coarse.x2)
        diff = fine.value(pts) - coarse.f.ravel()
        rms_ref = float(np.sqrt(np.mean(fine.f**2)))
        est = float(np.sqrt(np.mean(diff**2)) / 3.0)
        fine.richardson_rel_error = est / max(rms_ref, 1e-300)
    return fine


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

class ManufacturedContext:
    """Coefficient provider with the forcing induced by a closed-form field."""

    def __init__(self, airy: AiryField, loads: LoadModel, jet_fn):
        self.airy = airy
        self.loads = loads
        self.jet_fn = jet_fn

    def coefficients(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        S11, S22, S12 = projected_stresses(self.airy, self.loads, x)
        p1, p2 = horizontal_loads(self.loads, x)
        jet = self.jet_fn(x)
        q = (
            S11 * jet.f22
            + S22 * jet.f11
            + 2.0 * S12 * jet.f12
            - p1 * jet.f1
            - p2 * jet.f2
        )
        return S11, S22, S12, p1, p2, q


def _jet_constant(c):
    def jet(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.zeros(x.shape[0])
        return Jet(np.full(x.shape[0], c), z, z.copy(), z.copy(), z.copy(), z.copy())

    return jet


def _jet_paraboloid():
    def jet(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        two = np.full_like(x1, 2.0)
        return Jet(x1 * x1 + x2 * x2, 2.0 * x1, 2.0 * x2, two, np.zeros_like(x1), two.copy())

    return jet


def _jet_rect_arch_bump(l, b, h_arch, c0, c1):
    om = 2.0 * np.pi / l  # arch frequency
    w1 = 2.0 * np.pi / l  # bump frequencies
    w2 = np.pi / b
    cu, cv = 2.0 / l, 2.0 / b

    def jet(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        arch = 0.5 * h_arch * (1.0 + np.cos(om * x1))
        arch1 = -0.5 * h_arch * om * np.sin(om * x1)
        arch11 = -0.5 * h_arch * om * om * np.cos(om * x1)
        u = 1.0 - (cu * x1) ** 2
        u1 = -2.0 * cu * cu * x1
        u11 = -2.0 * cu * cu
        v = 1.0 - (cv * x2) ** 2
        v2 = -2.0 * cv * cv * x2
        v22 = -2.0 * cv * cv
        s, c = np.sin(w1 * x1), np.cos(w1 * x1)
        sc, cc = np.sin(w2 * x2), np.cos(w2 * x2)
        g = c0 + c1 * s * cc
        g1 = c1 * w1 * c * cc
        g2 = -c1 * w2 * s * sc
        g11 = -c1 * w1 * w1 * s * cc
        g12 = -c1 * w1 * w2 * c * sc
        g22 = -c1 * w2 * w2 * s * cc
        f = arch + u * v * g
        f1 = arch1 + (u1 * v * g + u * v * g1)
        f2 = u * v2 * g + u * v * g2
        f11 = arch11 + (u11 * v * g + 2.0 * u1 * v * g1 + u * v * g11)
        f12 = u1 * v2 * g + u1 * v * g2 + u * v2 * g1 + u * v * g12
        f22 = u * v22 * g + 2.0 * u * v2 * g2 + u * v * g22
        return Jet(f, f1, f2, f11, f12, f22)

    return jet


def _jet_rect_fd_trig(l, b, h_arch, amp):
    om = 2.0 * np.pi / l
    w1 = np.pi / l
    w2 = np.pi / b

    def jet(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        arch = 0.5 * h_arch * (1.0 + np.cos(om * x1))
        arch1 = -0.5 * h_arch * om * np.sin(om * x1)
        arch11 = -0.5 * h_arch * om * om * np.cos(om * x1)
        s1, c1_ = np.sin(w1 * x1), np.cos(w1 * x1)
        s2, c2_ = np.sin(w2 * x2), np.cos(w2 * x2)
        f = arch + amp * s1 * c2_
        f1 = arch1 + amp * w1 * c1_ * c2_
        f2 = -amp * w2 * s1 * s2
        f11 = arch11 - amp * w1 * w1 * s1 * c2_
        f12 = -amp * w1 * w2 * c1_ * s2
        f22 = -amp * w2 * w2 * s1 * c2_
        return Jet(f, f1, f2, f11, f12, f22)

    return jet


def _jet_disk_bump(R, h0, eps):
    c4 = eps / R**4

    def jet(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        f = h0 * (1.0 - (x1 * x1 + x2 * x2) / R**2) + c4 * (
            x1**4 - 6.0 * x1 * x1 * x2 * x2 + x2**4
        )
        f1 = -2.0 * h0 * x1 / R**2 + c4 * (4.0 * x1**3 - 12.0 * x1 * x2 * x2)
        f2 = -2.0 * h0 * x2 / R**2 + c4 * (4.0 * x2**3 - 12.0 * x1 * x1 * x2)
        f11 = -2.0 * h0 / R**2 + c4 * (12.0 * x1 * x1 - 12.0 * x2 * x2)
        f22 = -2.0 * h0 / R**2 + c4 * (12.0 * x2 * x2 - 12.0 * x1 * x1)
        f12 = c4 * (-24.0 * x1 * x2)
        return Jet(f, f1, f2, f11, f12, f22)

    return jet


def _jet_annulus_mix(R_in, R_out, c_quad, c_log, c_ang):
    c2 = c_quad / R_out**2
    c3 = c_ang / R_out**3

    def jet(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        r2 = x1 * x1 + x2 * x2
        f = c2 * r2 + c_log * 0.5 * np.log(r2 / R_in**2) + c3 * (x1**3 - 3.0 * x1 * x2 * x2)
        f1 = 2.0 * c2 * x1 + c_log * x1 / r2 + c3 * (3.0 * x1 * x1 - 3.0 * x2 * x2)
        f2 = 2.0 * c2 * x2 + c_log * x2 / r2 + c3 * (-6.0 * x1 * x2)
        f11 = 2.0 * c2 + c_log * (x2 * x2 - x1 * x1) / r2**2 + c3 * 6.0 * x1
        f22 = 2.0 * c2 + c_log * (x1 * x1 - x2 * x2) / r2**2 - c3 * 6.0 * x1
        f12 = c_log * (-2.0 * x1 * x2) / r2**2 - c3 * 6.0 * x2
        return Jet(f, f1, f2, f11, f12, f22)

    return jet


_CATALOG = {
    "constant": (_jet_constant, {"c": 1.0}),
    "paraboloid": (_jet_paraboloid, {}),
    "rect_arch_bump": (_jet_rect_arch_bump, {"h_arch": 2.0, "c0": 0.4, "c1": 0.6}),
    "rect_fd_trig": (_jet_rect_fd_trig, {"h_arch": 2.0, "amp": 1.0}),
    "disk_bump": (_jet_disk_bump, {"h0": 1.0, "eps": 0.1}),
    "annulus_mix": (_jet_annulus_mix, {"c_quad": 0.5, "c_log": 1.0, "c_ang": 0.25}),
}

MANUFACTURED_CHOICES = tuple(_CATALOG)


@dataclass
class ManufacturedCase:
    """Closed-form solution with its induced forcing and boundary data."""

    choice: str
    domain: DomainSpec
    airy: AiryField
    loads: LoadModel
    params: dict
    context: ManufacturedContext
    profile: BoundaryProfile | None
    projection_error: float

    def value(self, x) -> np.ndarray:
        return self.context.jet_fn(x).f

    def jet(self, x) -> Jet:
        return self.context.jet_fn(x)

    def boundary_values(self, x) -> np.ndarray:
        return self.value(x)

    def to_json(self) -> str:
        return json.dumps(
            {
                "choice": self.choice,
                "domain": self.domain.kind,
                "params": self.params,
                "projection_order": _PROJECTION_K,
                "projection_error": self.projection_error,
            },
            indent=2,
        )


def _project_fourier(values: np.ndarray, K: int) -> FourierProfile:
    """Least-squares Fourier coefficients of uniformly sampled periodic data."""
    n = values.size
    spec = np.fft.rfft(values)
    a0 = spec[0].real / n
    a = 2.0 * spec[1 : K + 1].real / n
    b = -2.0 * spec[1 : K + 1].imag / n
    return FourierProfile(float(a0), tuple(a), tuple(b))


def _projected_profile(case_value, domain: DomainSpec):
    """(BoundaryProfile, max projection error) from the trace of the field."""
    theta = np.linspace(0.0, 2.0 * np.pi, _PROJECTION_GRID, endpoint=False)
    circ = np.column_stack([np.cos(theta), np.sin(theta)])

    def ring_profile(radius):
        vals = case_value(radius * circ)
        prof = _project_fourier(vals, _PROJECTION_K)
        return prof, float(np.max(np.abs(prof.value(theta) - vals)))

    if domain.kind == "disk":
        prof, err = ring_profile(domain.R)
        return BoundaryProfile.disk_fourier(prof), err
    outer, err_o = ring_profile(domain.R_out)
    inner, err_i = ring_profile(domain.R_in)
    return BoundaryProfile.annulus_fourier(outer, inner), max(err_o, err_i)


def make_manufactured(
    domain: DomainSpec,
    airy: AiryField,
    loads: LoadModel,
    choice: str,
    **params,
) -> ManufacturedCase:
    """Build a catalog case: closed-form f*, induced q*, projected boundary data.

    ``loads`` contributes the horizontal components p1, p2 and the cumulative
    shifts inside S; its vertical intensity is superseded by the induced q*.
    """
    if choice not in _CATALOG:
        raise ValueError(f"unknown manufactured choice {choice!r}; have {MANUFACTURED_CHOICES}")
    maker, defaults = _CATALOG[choice]
    merged = dict(defaults)
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameters for {choice!r}: {sorted(unknown)}")
    merged.update(params)

    if choice in ("rect_arch_bump", "rect_fd_trig"):
        if domain.kind != "rectangle":
            raise ValueError(f"{choice!r} requires a rectangle domain")
        jet_fn = maker(domain.l, domain.b, **merged)
    elif choice == "disk_bump":
        if domain.kind != "disk":
            raise ValueError("'disk_bump' requires a disk domain")
        jet_fn = maker(domain.R, **merged)
    elif choice == "annulus_mix":
        if domain.kind != "annulus":
            raise ValueError("'annulus_mix' requires an annulus domain")
        jet_fn = maker(domain.R_in, domain.R_out, **merged)
    else:
        jet_fn = maker(**merged)

    context = ManufacturedContext(airy, loads, jet_fn)
    value = lambda x: jet_fn(x).f  # noqa: E731

    profile = None
    projection_error = 0.0
    if domain.kind == "rectangle":
        if choice == "rect_arch_bump":
            # the bump vanishes on the whole boundary; the trace is the arch itself
            profile = BoundaryProfile.rect_arch(merged["h_arch"])
        elif choice == "constant":
            profile = BoundaryProfile.rect_arch(0.0) if merged["c"] == 0.0 else None
    else:
        profile, projection_error = _projected_profile(value, domain)
        if projection_error > 1e-10:
            raise ValueError(
                f"boundary trace of {choice!r} is not band-limited within "
                f"K={_PROJECTION_K}: projection error {projection_error:.3e}"
            )
    return ManufacturedCase(
        choice, domain, airy, loads, merged, context, profile, projection_error
    )


# ---------------------------------------------------------------------------
# field comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompareMetrics:
    rmse: float
    rel_l2: float
    max_abs: float

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "rel_l2": self.rel_l2, "max_abs": self.max_abs}


def _values_of(field_obj, x):
    if hasattr(field_obj, "value"):
        return np.asarray(field_obj.value(x), dtype=float)
    return np.asarray(field_obj(x), dtype=float)


def compare_fields(candidate, reference, points) -> CompareMetrics:
    """RMSE, RMSE normalized by the reference RMS, and max absolute deviation."""
    x = points.x if isinstance(points, PointCloud) else np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("comparison cloud is empty")
    cand = _values_of(candidate, x)
    ref = _values_of(reference, x)
    diff = cand - ref
    rmse = float(np.sqrt(np.mean(diff * diff)))
    rms_ref = float(np.sqrt(np.mean(ref * ref)))
    if rms_ref == 0.0:
        raise ValueError("reference RMS is zero; relative L2 error undefined")
    return CompareMetrics(rmse, rmse / rms_ref, float(np.max(np.abs(diff))))


def comparison_cloud(domain: DomainSpec, n: int = 10_000, seed: int = 2024) -> PointCloud:
    """The fixed-seed interior cloud used for headline error numbers."""
    return sample_interior(domain, n, as_rng(seed))
