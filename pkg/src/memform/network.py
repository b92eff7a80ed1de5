"""MLP surrogate with exact second-order input jets and parameter gradients.

The surface evaluator is a fully connected GELU network mapping plan
coordinates to a scalar height.  Because the equilibrium residual needs f and
all partials up to second order, the forward pass propagates a six-component
Taylor jet (f, f,1, f,2, f,11, f,12, f,22) through every layer: linear layers
act on each component independently, activations apply the chain rule using
closed-form GELU derivatives.  Parameter gradients of jet-dependent losses are
obtained by reverse accumulation through that same jet pass, which needs the
third GELU derivative; the erf form of GELU keeps all of g', g'', g''' in
closed form:

    g(u)   = u * Phi(u)
    g'(u)  = Phi(u) + u * phi(u)
    g''(u) = phi(u) * (2 - u^2)
    g'''(u)= phi(u) * (u^3 - 4u)

with Phi/phi the standard normal CDF/PDF.  Inputs are affinely normalized to
[-1, 1]^2 per domain; the normalization Jacobian is folded into the jet seeds
so all reported derivatives are with respect to physical coordinates.  All
arithmetic is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .geometry import DomainSpec, as_rng
from .residual import Jet

__all__ = [
    "Normalization",
    "Mlp",
    "init_mlp",
    "gelu_terms",
    "forward_value",
    "backward_value",
    "forward_jet",
    "backward_jet",
    "param_gradient",
    "save_params",
    "load_params",
    "NetworkField",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Normalization:
    """Affine input map x -> (x - center) / scale, componentwise."""

    center: tuple[float, float] = (0.0, 0.0)
    scale: tuple[float, float] = (1.0, 1.0)

    @staticmethod
    def for_domain(domain: DomainSpec) -> "Normalization":
        hx, hy = domain.bounding_half_widths
        return Normalization(center=(0.0, 0.0), scale=(hx, hy))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - np.asarray(self.center)) / np.asarray(self.scale)


@dataclass
class Mlp:
    """Layer sizes [2, W, ..., W, 1] with weight matrices (out, in) and bias vectors."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    normalization: Normalization
    seed: int | None = None

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def to_vector(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_vector(self, vec: np.ndarray) -> None:
        ofs = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = vec[ofs : ofs + w.size].reshape(w.shape)
            ofs += w.size
            b[...] = vec[ofs : ofs + b.size]
            ofs += b.size
        if ofs != vec.size:
            raise ValueError("parameter vector length mismatch")

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.normalization,
            self.seed,
        )


def init_mlp(
    n_hidden: int,
    width: int,
    rng,
    normalization: Normalization | None = None,
) -> Mlp:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    if n_hidden < 1 or width < 1:
        raise ValueError("need n_hidden >= 1 and width >= 1")
    rng = as_rng(rng)
    sizes = [2] + [width] * n_hidden + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases, normalization or Normalization())


def gelu_terms(u: np.ndarray, order: int = 2):
    """(g, g', ..., g^(order)) of exact-erf GELU, elementwise."""
    u = np.asarray(u, dtype=float)
    cdf = ndtr(u)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    out = [u * cdf, cdf + u * pdf]
    if order >= 2:
        out.append(pdf * (2.0 - u * u))
    if order >= 3:
        out.append(pdf * (u * u * u - 4.0 * u))
    return tuple(out[: order + 1])


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"non-finite {what}: network evaluation diverged")


# ---------------------------------------------------------------------------
# value-only pass (standard MLP forward / backprop)
# ---------------------------------------------------------------------------

def forward_value(mlp: Mlp, x: np.ndarray, need_cache: bool = False):
    """Network values at (n, 2) points; optionally a cache for backward_value."""
    a = mlp.normalization.apply(np.asarray(x, dtype=float))
    cache = {"acts": [a], "g1s": []} if need_cache else None
    n_layers = len(mlp.weights)
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        if i < n_layers - 1:
            g, g1 = gelu_terms(z, order=1)
            a = g
            if need_cache:
                cache["g1s"].append(g1)
                cache["acts"].append(a)
        else:
            a = z
    f = a[:, 0]
    _check_finite(f, "value")
    return (f, cache) if need_cache else f


def backward_value(mlp: Mlp, cache: dict, fbar: np.ndarray) -> np.ndarray:
    """Gradient of sum_i fbar_i * f_i with respect to the flat parameter vector."""
    grads_w = [None] * len(mlp.weights)
    grads_b = [None] * len(mlp.biases)
    bar = np.asarray(fbar, dtype=float)[:, None]  # adjoint of the output layer
    for i in reversed(range(len(mlp.weights))):
        w = mlp.weights[i]
        a_prev = cache["acts"][i]
        grads_w[i] = bar.T @ a_prev
        grads_b[i] = bar.sum(axis=0)
        if i > 0:
            bar = (bar @ w) * cache["g1s"][i - 1]
    return _flatten_grads(grads_w, grads_b)


# ---------------------------------------------------------------------------
# jet pass (value + first/second input derivatives)
# ---------------------------------------------------------------------------
# Component layout: axis 0 of a (6, n, width) tensor holds
#   0: value, 1: d/dx1, 2: d/dx2, 3: d2/dx1^2, 4: d2/dx1dx2, 5: d2/dx2^2

def _seed_jets(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    a = np.zeros((6, n, 2))
    a[0] = mlp.normalization.apply(x)
    a[1, :, 0] = 1.0 / mlp.normalization.scale[0]
    a[2, :, 1] = 1.0 / mlp.normalization.scale[1]
    return a


def _linear_jet(a: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    six, n, fan_in = a.shape
    z = (a.reshape(six * n, fan_in) @ w.T).reshape(six, n, w.shape[0])
    z[0] += b
    return z


def _activate_jet(z: np.ndarray, order: int = 2):
    g, g1, g2 = gelu_terms(z[0], order=2)[:3]
    a = np.empty_like(z)
    a[0] = g
    a[1] = g1 * z[1]
    a[2] = g1 * z[2]
    a[3] = g2 * z[1] * z[1] + g1 * z[3]
    a[4] = g2 * z[1] * z[2] + g1 * z[4]
    a[5] = g2 * z[2] * z[2] + g1 * z[5]
    return a, (g1, g2)


def forward_jet(mlp: Mlp, x: np.ndarray, need_cache: bool = False):
    """Exact jet of the network at (n, 2) points.

    Returns a Jet of (n,) arrays, plus a cache when requested for the reverse
    pass.  Raises FloatingPointError on non-finite intermediates.
    """
    a = _seed_jets(mlp, x)
    cache = {"acts": [a], "pre": [], "gderiv": []} if need_cache else None
    n_layers = len(mlp.weights)
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = _linear_jet(a, w, b)
        if i < n_layers - 1:
            if need_cache:
                g, g1, g2, g3 = gelu_terms(z[0], order=3)
                a = np.empty_like(z)
                a[0] = g
                a[1] = g1 * z[1]
                a[2] = g1 * z[2]
                a[3] = g2 * z[1] * z[1] + g1 * z[3]
                a[4] = g2 * z[1] * z[2] + g1 * z[4]
                a[5] = g2 * z[2] * z[2] + g1 * z[5]
                cache["pre"].append(z)
                cache["gderiv"].append((g1, g2, g3))
                cache["acts"].append(a)
            else:
                a, _ = _activate_jet(z)
        else:
            a = z
    out = a[:, :, 0]  # (6, n)
    _check_finite(out, "jet")
    jet = Jet(out[0], out[1], out[2], out[3], out[4], out[5])
    return (jet, cache) if need_cache else jet


def backward_jet(mlp: Mlp, cache: dict, jet_bar: np.ndarray) -> np.ndarray:
    """Gradient of sum_c sum_i jet_bar[c, i] * jet[c, i] w.r.t. the flat parameters.

    jet_bar is (6, n) in the component order of forward_jet.
    """
    n = jet_bar.shape[1]
    grads_w = [None] * len(mlp.weights)
    grads_b = [None] * len(mlp.biases)
    bar = np.asarray(jet_bar, dtype=float).reshape(6, n, 1)
    for i in reversed(range(len(mlp.weights))):
        w = mlp.weights[i]
        a_prev = cache["acts"][i]
        six, _, fan_out = bar.shape
        bar_flat = bar.reshape(six * n, fan_out)
        a_flat = a_prev.reshape(six * n, a_prev.shape[2])
        grads_w[i] = bar_flat.T @ a_flat
        grads_b[i] = bar[0].sum(axis=0)
        if i > 0:
            bar_a = (bar_flat @ w).reshape(six, n, w.shape[1])
            z = cache["pre"][i - 1]
            g1, g2, g3 = cache["gderiv"][i - 1]
            bz = np.empty_like(bar_a)
            bz[1] = g1 * bar_a[1] + g2 * (2.0 * bar_a[3] * z[1] + bar_a[4] * z[2])
            bz[2] = g1 * bar_a[2] + g2 * (2.0 * bar_a[5] * z[2] + bar_a[4] * z[1])
            bz[3] = g1 * bar_a[3]
            bz[4] = g1 * bar_a[4]
            bz[5] = g1 * bar_a[5]
            bz[0] = (
                g1 * bar_a[0]
                + g2 * (bar_a[1] * z[1] + bar_a[2] * z[2])
                + g3 * (bar_a[3] * z[1] * z[1] + bar_a[4] * z[1] * z[2] + bar_a[5] * z[2] * z[2])
                + g2 * (bar_a[3] * z[3] + bar_a[4] * z[4] + bar_a[5] * z[5])
            )
            bar = bz
    grad = _flatten_grads(grads_w, grads_b)
    _check_finite(grad, "gradient")
    return grad


def _flatten_grads(grads_w, grads_b) -> np.ndarray:
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb)
    return np.concatenate(parts)


def param_gradient(mlp: Mlp, x: np.ndarray, loss_fn):
    """(loss, gradient) for a scalar loss built from the batch jets.

    ``loss_fn(jet) -> (loss, jet_bar)`` supplies the loss value and its partial
    derivatives with respect to each jet component, shape (6, n).
    """
    jet, cache = forward_jet(mlp, x, need_cache=True)
    loss, jet_bar = loss_fn(jet)
    grad = backward_jet(mlp, cache, np.asarray(jet_bar, dtype=float))
    return loss, grad


# ---------------------------------------------------------------------------
# serialization: JSON header + raw little-endian float64 blob, bit-exact
# ---------------------------------------------------------------------------

def save_params(mlp: Mlp, path_base) -> None:
    base = Path(path_base)
    header = {
        "layer_sizes": list(mlp.layer_sizes),
        "seed": mlp.seed,
        "center": list(mlp.normalization.center),
        "scale": list(mlp.normalization.scale),
        "dtype": "<f8",
        "n_params": mlp.n_params,
    }
    base.with_suffix(".json").write_text(json.dumps(header, indent=2))
    vec = np.ascontiguousarray(mlp.to_vector(), dtype="<f8")
    base.with_suffix(".bin").write_bytes(vec.tobytes())


def load_params(path_base) -> Mlp:
    base = Path(path_base)
    header = json.loads(base.with_suffix(".json").read_text())
    sizes = header["layer_sizes"]
    norm = Normalization(center=tuple(header["center"]), scale=tuple(header["scale"]))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(np.zeros((fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    mlp = Mlp(sizes, weights, biases, norm, header.get("seed"))
    raw = base.with_suffix(".bin").read_bytes()
    vec = np.frombuffer(raw, dtype="<f8").copy()
    if vec.size != header["n_params"]:
        raise ValueError("checkpoint length does not match header")
    mlp.set_vector(vec)
    return mlp


class NetworkField:
    """Bare network as a surface evaluator (the penalty-trained formulation)."""

    def __init__(self, mlp: Mlp):
        self.mlp = mlp

    def value(self, x: np.ndarray) -> np.ndarray:
        return forward_value(self.mlp, x)

    def jet(self, x: np.ndarray) -> Jet:
        return forward_jet(self.mlp, x)
