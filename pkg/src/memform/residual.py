"""Equilibrium-PDE residual evaluation from derivative jets.

The governing equation is

    S11 f,22 + S22 f,11 + 2 S12 f,12 - p1 f,1 - p2 f,2 = q

so the residual r is the left side minus q.  A "jet" bundles the value and all
first/second partials of f with respect to (x1, x2); field evaluators return
batched jets and a PdeContext supplies (S11, S22, S12, p1, p2, q) at points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stress import AiryField, LoadModel, projected_stresses, horizontal_loads, vertical_load

__all__ = ["Jet", "PhysicalContext", "pde_residual", "residual_rmse", "pairwise_mean"]


@dataclass
class Jet:
    """Value plus first and second partials; fields are scalars or (n,) arrays."""

    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f11: np.ndarray
    f12: np.ndarray
    f22: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        self.f1 = np.asarray(self.f1, dtype=float)
        self.f2 = np.asarray(self.f2, dtype=float)
        self.f11 = np.asarray(self.f11, dtype=float)
        self.f12 = np.asarray(self.f12, dtype=float)
        self.f22 = np.asarray(self.f22, dtype=float)

    @staticmethod
    def zeros(n: int) -> "Jet":
        return Jet(*(np.zeros(n) for _ in range(6)))

    def as_array(self) -> np.ndarray:
        """(6, n) stack in the order f, f1, f2, f11, f12, f22."""
        return np.stack([self.f, self.f1, self.f2, self.f11, self.f12, self.f22])


@dataclass(frozen=True)
class PhysicalContext:
    """PDE coefficients generated by an Airy field and a load model."""

    airy: AiryField
    loads: LoadModel

    def coefficients(self, x: np.ndarray):
        """Return (S11, S22, S12, p1, p2, q) arrays at the (n, 2) points."""
        s11, s22, s12 = projected_stresses(self.airy, self.loads, x)
        p1, p2 = horizontal_loads(self.loads, x)
        q = vertical_load(self.loads, x)
        n = np.atleast_2d(x).shape[0]
        return (
            np.broadcast_to(np.asarray(s11, dtype=float), (n,)).copy(),
            np.broadcast_to(np.asarray(s22, dtype=float), (n,)).copy(),
            np.broadcast_to(np.asarray(s12, dtype=float), (n,)).copy(),
            np.broadcast_to(np.asarray(p1, dtype=float), (n,)).copy(),
            np.broadcast_to(np.asarray(p2, dtype=float), (n,)).copy(),
            np.broadcast_to(np.asarray(q, dtype=float), (n,)).copy(),
        )


def pde_residual(jet: Jet, S, p, q):
    """r = S11 f,22 + S22 f,11 + 2 S12 f,12 - p1 f,1 - p2 f,2 - q."""
    s11, s22, s12 = S
    p1, p2 = p
    return (
        s11 * jet.f22
        + s22 * jet.f11
        + 2.0 * s12 * jet.f12
        - p1 * jet.f1
        - p2 * jet.f2
        - q
    )


def pairwise_mean(values: np.ndarray) -> float:
    """Mean via pairwise summation; deterministic regardless of batch slicing."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty batch")
    # numpy's add.reduce already uses pairwise summation for 1-D float arrays
    return float(np.add.reduce(values) / values.size)


def residual_rmse(field, context, points) -> float:
    """Root-mean-square PDE residual of a jet-capable field over interior points.

    ``field`` must expose ``jet(x) -> Jet`` for an (n, 2) batch; ``points`` may
    be a PointCloud or a raw (n, 2) array.
    """
    x = points.x if hasattr(points, "x") else np.asarray(points, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty point cloud")
    jet = field.jet(x)
    s11, s22, s12, p1, p2, q = context.coefficients(x)
    r = pde_residual(jet, (s11, s22, s12), (p1, p2), q)
    return float(np.sqrt(pairwise_mean(r * r)))
