"""Exact Dirichlet enforcement: f = D * N + G.

D is a smooth non-negative distance-like factor vanishing on the boundary, G a
lift matching the boundary heights, so the composite satisfies the Dirichlet
data for any network parameters.  The circular lifts are harmonic; they are
evaluated through holomorphic functions of z = x1 + i x2, which gives all
Cartesian derivatives in closed form:

    G = Re H,  G,1 = Re H',  G,2 = -Im H',
    G,11 = Re H'', G,12 = -Im H'', G,22 = -Re H''.

The rectangle lift is the prescribed raised-cosine arch itself (x2-independent,
matches the boundary data on all four edges, not harmonic).

Least surprise on the annulus: r^-k and log r blow up toward the origin, so
evaluation requires r >= R_in (up to roundoff slack).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundaryProfile, DomainSpec, FourierProfile
from .network import Mlp, forward_jet, forward_value
from .residual import Jet

__all__ = [
    "MAX_HARMONIC_ORDER",
    "LiftSpec",
    "distance_eval",
    "fit_disk_lift",
    "fit_annulus_lift",
    "make_lift",
    "lift_eval",
    "combine_jets",
    "combine_adjoint",
    "HardField",
]

# the 2x2 solves have determinant (R_out/R_in)^k - (R_in/R_out)^k, which grows
# with k; overflow, not ill-conditioning, is the failure mode at large k
MAX_HARMONIC_ORDER = 32


def distance_eval(domain: DomainSpec, x: np.ndarray):
    """(D, D1, D2, D11, D12, D22) arrays at the (n, 2) points.

    rectangle: (1 - (2 x1/l)^2) (1 - (2 x2/b)^2)
    disk:      1 - (x1^2 + x2^2) / R^2
    annulus:   (r - R_in)(R_out - r) / ((R_out - R_in)^2 / 4)
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[:, 0], x[:, 1]
    if domain.kind == "rectangle":
        cu, cv = 2.0 / domain.l, 2.0 / domain.b
        u = 1.0 - (cu * x1) ** 2
        v = 1.0 - (cv * x2) ** 2
        du = -2.0 * cu * cu * x1
        dv = -2.0 * cv * cv * x2
        ddu = np.full_like(x1, -2.0 * cu * cu)
        ddv = np.full_like(x2, -2.0 * cv * cv)
        return u * v, du * v, u * dv, ddu * v, du * dv, u * ddv
    if domain.kind == "disk":
        inv_r2 = 1.0 / domain.R**2
        d = 1.0 - (x1 * x1 + x2 * x2) * inv_r2
        zeros = np.zeros_like(x1)
        const = np.full_like(x1, -2.0 * inv_r2)
        return d, -2.0 * inv_r2 * x1, -2.0 * inv_r2 * x2, const, zeros, const.copy()
    # annulus: compose the radial profile with r(x1, x2)
    d_max = (domain.R_out - domain.R_in) ** 2 / 4.0
    r = np.sqrt(x1 * x1 + x2 * x2)
    dr = ((r - domain.R_in) * (domain.R_out - r)) / d_max
    ddr = (domain.R_in + domain.R_out - 2.0 * r) / d_max
    dddr = -2.0 / d_max
    inv_r = 1.0 / r
    r1, r2 = x1 * inv_r, x2 * inv_r
    r11 = inv_r - x1 * x1 * inv_r**3
    r22 = inv_r - x2 * x2 * inv_r**3
    r12 = -x1 * x2 * inv_r**3
    return (
        dr,
        ddr * r1,
        ddr * r2,
        dddr * r1 * r1 + ddr * r11,
        dddr * r1 * r2 + ddr * r12,
        dddr * r2 * r2 + ddr * r22,
    )


@dataclass(frozen=True)
class LiftSpec:
    """Boundary-data lift: rect_arch, disk_fourier, or annulus_fourier.

    Disk coefficients are the boundary Fourier set (a0, a_k, b_k).  Annulus
    coefficients (A0, B0, A_k, B_k, C_k, D_k) are solved so the radial basis
    {r^k, r^-k} (and log r for k=0) matches both boundary circles.
    """

    kind: str
    h_arch: float = 0.0
    l: float = 0.0
    R: float = 0.0
    R_in: float = 0.0
    R_out: float = 0.0
    a0: float = 0.0
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    A0: float = 0.0
    B0: float = 0.0
    A: tuple[float, ...] = ()
    B: tuple[float, ...] = ()
    C: tuple[float, ...] = ()
    D: tuple[float, ...] = ()

    def to_json(self) -> str:
        payload = {"kind": self.kind}
        if self.kind == "rect_arch":
            payload.update(h_arch=self.h_arch, l=self.l)
        elif self.kind == "disk_fourier":
            payload.update(R=self.R, a0=self.a0, a=list(self.a), b=list(self.b))
        else:
            payload.update(
                R_in=self.R_in,
                R_out=self.R_out,
                A0=self.A0,
                B0=self.B0,
                A=list(self.A),
                B=list(self.B),
                C=list(self.C),
                D=list(self.D),
            )
        return json.dumps(payload, indent=2)

    @staticmethod
    def from_json(text: str) -> "LiftSpec":
        d = json.loads(text)
        kind = d.pop("kind")
        for key in ("a", "b", "A", "B", "C", "D"):
            if key in d:
                d[key] = tuple(d[key])
        return LiftSpec(kind=kind, **d)


def fit_disk_lift(profile: FourierProfile, R: float) -> LiftSpec:
    """Harmonic lift G(r, theta) = a0 + sum (r/R)^k (a_k cos + b_k sin)."""
    if profile.order > MAX_HARMONIC_ORDER:
        raise ValueError(f"harmonic order {profile.order} exceeds cap {MAX_HARMONIC_ORDER}")
    return LiftSpec("disk_fourier", R=R, a0=profile.a0, a=profile.a, b=profile.b)


def fit_annulus_lift(
    g_out: FourierProfile, g_in: FourierProfile, R_in: float, R_out: float
) -> LiftSpec:
    """Solve the radial 2x2 systems that match both boundary Fourier sets."""
    if not 0 < R_in < R_out:
        raise ValueError("need 0 < R_in < R_out")
    order = max(g_out.order, g_in.order)
    if order > MAX_HARMONIC_ORDER:
        raise ValueError(f"harmonic order {order} exceeds cap {MAX_HARMONIC_ORDER}")

    def coef(profile, k, which):
        seq = profile.a if which == "a" else profile.b
        return seq[k - 1] if k <= profile.order else 0.0

    b0 = (g_out.a0 - g_in.a0) / np.log(R_out / R_in)
    a0 = g_out.a0 - b0 * np.log(R_out)
    A, B, C, D = [], [], [], []
    for k in range(1, order + 1):
        m11, m12 = R_out**k, R_out ** (-k)
        m21, m22 = R_in**k, R_in ** (-k)
        det = m11 * m22 - m12 * m21
        for dst_hi, dst_lo, which in ((A, B, "a"), (C, D, "b")):
            rhs_out = coef(g_out, k, which)
            rhs_in = coef(g_in, k, which)
            dst_hi.append((m22 * rhs_out - m12 * rhs_in) / det)
            dst_lo.append((m11 * rhs_in - m21 * rhs_out) / det)
    return LiftSpec(
        "annulus_fourier",
        R_in=R_in,
        R_out=R_out,
        A0=a0,
        B0=b0,
        A=tuple(A),
        B=tuple(B),
        C=tuple(C),
        D=tuple(D),
    )


def make_lift(domain: DomainSpec, profile: BoundaryProfile) -> LiftSpec:
    if domain.kind == "rectangle":
        return LiftSpec("rect_arch", h_arch=profile.h_arch, l=domain.l)
    if domain.kind == "disk":
        return fit_disk_lift(profile.fourier, domain.R)
    return fit_annulus_lift(profile.fourier, profile.fourier_inner, domain.R_in, domain.R_out)


def _holomorphic_eval(lift: LiftSpec, z: np.ndarray):
    """H, H', H'' of the complex generator of a circular lift."""
    h = np.full_like(z, complex(lift.a0 if lift.kind == "disk_fourier" else lift.A0))
    hp = np.zeros_like(z)
    hpp = np.zeros_like(z)
    if lift.kind == "disk_fourier":
        zr = z / lift.R
        power = np.ones_like(z)  # zr^(k-1)
        for k in range(1, len(lift.a) + 1):
            c = lift.a[k - 1] - 1j * lift.b[k - 1]
            h = h + c * power * zr
            hp = hp + c * k * power / lift.R
            if k >= 2:
                hpp = hpp + c * k * (k - 1) * power / (lift.R * z)
            power = power * zr
        return h, hp, hpp
    # annulus: A0 + B0 log z + sum (A_k - i C_k) z^k + (B_k + i D_k) z^-k
    h = h + lift.B0 * np.log(z)
    hp = hp + lift.B0 / z
    hpp = hpp - lift.B0 / (z * z)
    zk = np.ones_like(z)
    for k in range(1, len(lift.A) + 1):
        zk = zk * z
        zmk = 1.0 / zk
        c_hi = lift.A[k - 1] - 1j * lift.C[k - 1]
        c_lo = lift.B[k - 1] + 1j * lift.D[k - 1]
        h = h + c_hi * zk + c_lo * zmk
        hp = hp + k * (c_hi * zk - c_lo * zmk) / z
        hpp = hpp + (k * (k - 1) * c_hi * zk + k * (k + 1) * c_lo * zmk) / (z * z)
    return h, hp, hpp


def lift_eval(lift: LiftSpec, x: np.ndarray):
    """(G, G1, G2, G11, G12, G22) arrays at the (n, 2) points."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[:, 0], x[:, 1]
    if lift.kind == "rect_arch":
        omega = 2.0 * np.pi / lift.l
        g = 0.5 * lift.h_arch * (1.0 + np.cos(omega * x1))
        g1 = -0.5 * lift.h_arch * omega * np.sin(omega * x1)
        g11 = -0.5 * lift.h_arch * omega * omega * np.cos(omega * x1)
        zeros = np.zeros_like(x1)
        return g, g1, zeros, g11, zeros.copy(), zeros.copy()
    if lift.kind == "annulus_fourier":
        r = np.hypot(x1, x2)
        if np.any(r < lift.R_in * (1.0 - 1e-12)):
            raise ValueError("annulus lift evaluated below the inner radius")
    z = x1 + 1j * x2
    h, hp, hpp = _holomorphic_eval(lift, z)
    return h.real, hp.real, -hp.imag, hpp.real, -hpp.imag, -hpp.real


def combine_jets(d6, n6, g6):
    """Jet of f = D*N + G by the product rule; each argument is a 6-tuple/stack."""
    d, d1, d2, d11, d12, d22 = d6
    nv, n1, n2, n11, n12, n22 = n6
    g, g1, g2, g11, g12, g22 = g6
    return (
        d * nv + g,
        d1 * nv + d * n1 + g1,
        d2 * nv + d * n2 + g2,
        d11 * nv + 2.0 * d1 * n1 + d * n11 + g11,
        d12 * nv + d1 * n2 + d2 * n1 + d * n12 + g12,
        d22 * nv + 2.0 * d2 * n2 + d * n22 + g22,
    )


def combine_adjoint(d6, fbar):
    """Map adjoints of the composite jet to adjoints of the network jet."""
    d, d1, d2, d11, d12, d22 = d6
    bf, b1, b2, b11, b12, b22 = fbar
    nbar = np.empty((6,) + np.shape(bf))
    nbar[0] = d * bf + d1 * b1 + d2 * b2 + d11 * b11 + d12 * b12 + d22 * b22
    nbar[1] = d * b1 + 2.0 * d1 * b11 + d2 * b12
    nbar[2] = d * b2 + 2.0 * d2 * b22 + d1 * b12
    nbar[3] = d * b11
    nbar[4] = d * b12
    nbar[5] = d * b22
    return nbar


class HardField:
    """Composite surface f = D * N_theta + G over a domain."""

    def __init__(self, mlp: Mlp, domain: DomainSpec, lift: LiftSpec):
        self.mlp = mlp
        self.domain = domain
        self.lift = lift

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = distance_eval(self.domain, x)[0]
        g = lift_eval(self.lift, x)[0]
        return d * forward_value(self.mlp, x) + g

    def jet(self, x: np.ndarray) -> Jet:
        x = np.asarray(x, dtype=float)
        d6 = distance_eval(self.domain, x)
        g6 = lift_eval(self.lift, x)
        njet = forward_jet(self.mlp, x)
        f6 = combine_jets(d6, njet.as_array(), g6)
        return Jet(*f6)
