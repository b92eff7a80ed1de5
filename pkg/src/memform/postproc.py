"""Principal stresses, surface/field export, and the run metrics report.

Principal values come from the closed-form symmetric 2x2 eigendecomposition
of the projected stress tensor; directions from the half-angle of
atan2(2 S12, S11 - S22).  Isotropic tensors have no preferred directions, so
they get the canonical axes and a degeneracy flag rather than an arbitrary
rotation, keeping plot output deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .geometry import DomainSpec
from .reference import compare_fields, comparison_cloud

__all__ = [
    "PrincipalState",
    "principal_stresses",
    "export_surface",
    "export_residual",
    "export_principal",
    "report_metrics",
]


@dataclass
class PrincipalState:
    """sigma1 >= sigma2 with orthonormal plan directions e1, e2."""

    sigma1: np.ndarray | float
    sigma2: np.ndarray | float
    e1: np.ndarray
    e2: np.ndarray
    degenerate: np.ndarray | bool


def principal_stresses(S) -> PrincipalState:
    """Eigendecomposition of [[S11, S12], [S12, S22]], scalar or batched."""
    S11, S22, S12 = (np.asarray(c, dtype=float) for c in S)
    single = S11.ndim == 0
    S11, S22, S12 = np.atleast_1d(S11, S22, S12)
    mean = 0.5 * (S11 + S22)
    rad = np.sqrt((0.5 * (S11 - S22)) ** 2 + S12 * S12)
    sigma1 = mean + rad
    sigma2 = mean - rad
    angle = 0.5 * np.arctan2(2.0 * S12, S11 - S22)
    e1 = np.column_stack([np.cos(angle), np.sin(angle)])
    e2 = np.column_stack([-np.sin(angle), np.cos(angle)])
    scale = np.abs(S11) + np.abs(S22) + np.abs(S12)
    degenerate = rad <= 1e-14 * (scale + 1.0)
    if single:
        return PrincipalState(
            float(sigma1[0]), float(sigma2[0]), e1[0], e2[0], bool(degenerate[0])
        )
    return PrincipalState(sigma1, sigma2, e1, e2, degenerate)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def _contains_closed(domain: DomainSpec, pts: np.ndarray) -> np.ndarray:
    """Closure test (boundary included, with a roundoff-sized tolerance)."""
    x1, x2 = pts[:, 0], pts[:, 1]
    if domain.kind == "rectangle":
        tol = 1e-12 * domain.characteristic_size
        return (np.abs(x1) <= domain.l / 2.0 + tol) & (np.abs(x2) <= domain.b / 2.0 + tol)
    r = np.hypot(x1, x2)
    if domain.kind == "disk":
        return r <= domain.R * (1.0 + 1e-12)
    return (r >= domain.R_in * (1.0 - 1e-12)) & (r <= domain.R_out * (1.0 + 1e-12))


def _export_grid(domain: DomainSpec, resolution):
    if isinstance(resolution, int):
        nx = ny = resolution
    else:
        nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("need at least 2 nodes per axis")
    hx, hy = domain.bounding_half_widths
    x1 = np.linspace(-hx, hx, nx)
    x2 = np.linspace(-hy, hy, ny)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    return pts, _contains_closed(domain, pts), nx, ny


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def export_surface(field_obj, domain: DomainSpec, resolution, fmt: str, path) -> str:
    """Write the surface on a domain-masked tensor grid as CSV or an OBJ mesh."""
    pts, mask, nx, ny = _export_grid(domain, resolution)
    if fmt not in ("csv", "obj"):
        raise ValueError(f"unsupported export format {fmt!r}")
    values = np.full(pts.shape[0], np.nan)
    values[mask] = np.asarray(field_obj.value(pts[mask]), dtype=float)
    if fmt == "csv":
        lines = ["x1,x2,f"]
        for k in np.flatnonzero(mask):
            # repr(float(.)) round-trips bit-exactly; np scalars do not
            lines.append(f"{float(pts[k, 0])!r},{float(pts[k, 1])!r},{float(values[k])!r}")
        _atomic_write(path, "\n".join(lines) + "\n")
        return str(path)
    # OBJ: vertices in row-major masked order, cells split into two triangles,
    # triangles kept only when every corner lies inside the domain
    index = np.zeros(pts.shape[0], dtype=int)
    index[mask] = np.arange(1, int(mask.sum()) + 1)
    lines = []
    for k in np.flatnonzero(mask):
        lines.append(f"v {float(pts[k, 0])!r} {float(pts[k, 1])!r} {float(values[k])!r}")
    for i in range(nx - 1):
        for j in range(ny - 1):
            n00 = i * ny + j
            n10 = (i + 1) * ny + j
            n01 = i * ny + j + 1
            n11 = (i + 1) * ny + j + 1
            for tri in ((n00, n10, n11), (n00, n11, n01)):
                if all(mask[t] for t in tri):
                    lines.append("f " + " ".join(str(index[t]) for t in tri))
    _atomic_write(path, "\n".join(lines) + "\n")
    return str(path)


def export_residual(field_obj, context, domain: DomainSpec, resolution, path) -> str:
    """CSV of the pointwise PDE residual on the masked grid."""
    from .residual import pde_residual

    pts, mask, _, _ = _export_grid(domain, resolution)
    inside = pts[mask]
    S11, S22, S12, p1, p2, q = context.coefficients(inside)
    r = pde_residual(field_obj.jet(inside), (S11, S22, S12), (p1, p2), q)
    lines = ["x1,x2,residual"]
    for (x1, x2), val in zip(inside, r):
        lines.append(f"{float(x1)!r},{float(x2)!r},{float(val)!r}")
    _atomic_write(path, "\n".join(lines) + "\n")
    return str(path)


def export_principal(context, domain: DomainSpec, resolution, path) -> str:
    """CSV of principal stresses and the major direction on the masked grid."""
    pts, mask, _, _ = _export_grid(domain, resolution)
    inside = pts[mask]
    S11, S22, S12, _, _, _ = context.coefficients(inside)
    ps = principal_stresses((S11, S22, S12))
    lines = ["x1,x2,sigma1,sigma2,e1_x1,e1_x2,degenerate"]
    for k, (x1, x2) in enumerate(inside):
        lines.append(
            f"{float(x1)!r},{float(x2)!r},{float(ps.sigma1[k])!r},{float(ps.sigma2[k])!r},"
            f"{float(ps.e1[k, 0])!r},{float(ps.e1[k, 1])!r},{int(ps.degenerate[k])}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# metrics report
# ---------------------------------------------------------------------------

def _config_hash(config) -> str:
    payload = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def report_metrics(result, reference=None, points=None) -> dict:
    """Schema-stable summary of a finished run; comparison fields null without a reference."""
    history = result.history
    last = history[-1] if history else None
    comparison = {"rmse": None, "rel_l2_percent": None, "max_abs": None, "n_points": None}
    if reference is not None:
        cloud = points if points is not None else comparison_cloud(result.problem.domain)
        metrics = compare_fields(result.field, reference, cloud)
        comparison = {
            "rmse": metrics.rmse,
            "rel_l2_percent": 100.0 * metrics.rel_l2,
            "max_abs": metrics.max_abs,
            "n_points": len(cloud),
        }
    report = {
        "case": result.problem.name,
        "formulation": result.config.formulation,
        "comparison": comparison,
        "pde_rmse_train_final": last.pde_rmse_train if last else None,
        "pde_rmse_val_final": last.pde_rmse_val if last else None,
        "best_val_epoch": result.best_val_epoch,
        "best_val_pde_rmse": result.best_val_rmse,
        "max_boundary_error": result.max_boundary_error,
        "admissibility": result.admissibility.to_dict(),
        "diverged": result.diverged,
        "warnings": list(result.warnings),
        "epochs_run": len(history),
        "seeds": {
            "init": result.config.seed_init,
            "sample": result.config.seed_sample,
            "relobralo": result.config.seed_relobralo,
            "validation": result.config.seed_val,
        },
        "config_hash": _config_hash(result.config),
        "wallclock_s": last.wallclock_s if last else 0.0,
    }
    return report
