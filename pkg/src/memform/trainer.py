"""Two-stage collocation training for the equilibrium surface.

Stage 1 runs full-batch Adam; Stage 2 restarts L-BFGS from the best Stage-1
checkpoint (lowest total training loss).  Interior and boundary clouds are
redrawn every K_resample epochs in both stages; the L-BFGS curvature history
is flushed at each redraw because the objective changes with the cloud.  The
returned model is the checkpoint with the lowest validation PDE-RMSE,
measured on a held-out interior cloud that never drives parameter updates.

The soft formulation penalizes the boundary misfit and balances the two loss
terms with ReLoBRaLo: tentative weights are a softmax of loss ratios against
a randomly selected past epoch (previous with probability rho, initial
otherwise), blended into the running weights by an exponential moving
average.  Weight updates use the two most recent recorded losses, so the
fused loss/gradient pass stays single-sweep; during Stage 2 the weights are
frozen (a per-step reweighting would invalidate the L-BFGS history).  The
hard formulation trains on the PDE residual alone and never evaluates a
boundary loss; the boundary misfit is still monitored (value pass only) to
confirm the ansatz keeps it at roundoff level.
"""

from __future__ import annotations

import os
import time
import warnings as _warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    BoundaryProfile,
    DomainSpec,
    PointCloud,
    as_rng,
    boundary_height,
    sample_boundary_curvature,
    sample_boundary_uniform,
    sample_interior,
)
from .hard_bc import HardField, LiftSpec, combine_adjoint, combine_jets, distance_eval, lift_eval, make_lift
from .network import (
    Mlp,
    NetworkField,
    Normalization,
    backward_jet,
    backward_value,
    forward_jet,
    forward_value,
    init_mlp,
    save_params,
)
from .optim import AdamState, LbfgsState, LineSearchReport, adam_step, lbfgs_step
from .residual import Jet, PhysicalContext, pde_residual, residual_rmse
from .stress import AdmissibilityReport, AiryField, LoadModel, check_admissibility

__all__ = [
    "Problem",
    "TrainConfig",
    "LossRecord",
    "TrainResult",
    "soft_losses",
    "relobralo_update",
    "adam_step",
    "lbfgs_step",
    "train",
    "validate_pde",
    "write_convergence_csv",
]

_CHUNK = 2048  # fixed slice size keeps accumulation order (and bytes) reproducible
_DIVERGENCE_CAP = 1e12

CSV_COLUMNS = (
    "epoch",
    "stage",
    "L_pde",
    "L_bc",
    "w_pde",
    "w_bc",
    "total",
    "pde_rmse_train",
    "pde_rmse_val",
    "ref_rmse",
    "wallclock_s",
)


@dataclass(frozen=True)
class Problem:
    """One form-finding case: plan geometry, stress field, loads, boundary heights.

    ``context_override`` swaps in another coefficient provider (same
    ``coefficients(x)`` interface), e.g. a manufactured-forcing context.
    """

    domain: DomainSpec
    airy: AiryField
    loads: LoadModel
    profile: BoundaryProfile
    name: str = "case"
    context_override: object = None

    def context(self) -> PhysicalContext:
        if self.context_override is not None:
            return self.context_override
        return PhysicalContext(self.airy, self.loads)


@dataclass(frozen=True)
class TrainConfig:
    formulation: str  # 'soft' | 'hard'
    n_hidden: int = 4
    width: int = 256
    eta_adam: float = 1e-3
    e_adam: int = 30_000
    e_lbfgs: int = 10_000
    lbfgs_m: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    n_pde: int = 16_384
    n_bc: int = 1_024
    n_bc_curv: int = 1_024
    k_resample: float = 10.0
    relobralo_alpha: float = 0.999
    relobralo_rho: float = 0.8
    relobralo_tau: float = 2.0
    w_pde: float = 1.0
    w_bc: float = 1.0
    seed_init: int = 0
    seed_sample: int = 1
    seed_relobralo: int = 2
    seed_val: int = 3
    n_val: int = 4_096
    checkpoint_every: int = 0  # 0 disables periodic checkpoints

    def validate(self) -> None:
        if self.formulation not in ("soft", "hard"):
            raise ValueError("formulation must be 'soft' or 'hard'")
        if min(self.n_hidden, self.width, self.n_pde, self.n_bc, self.n_val) <= 0:
            raise ValueError("architecture and collocation counts must be positive")
        if self.n_bc_curv < 0 or self.e_adam < 0 or self.e_lbfgs < 0 or self.lbfgs_m <= 0:
            raise ValueError("epoch counts must be >= 0 and history size positive")
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if not self.k_resample > 0:
            raise ValueError("k_resample must be positive (inf disables resampling)")
        if not (0.0 < self.relobralo_alpha <= 1.0 and 0.0 < self.relobralo_rho <= 1.0):
            raise ValueError("relobralo alpha and rho must lie in (0, 1]")
        if self.relobralo_tau <= 0.0:
            raise ValueError("relobralo tau must be positive")
        if min(self.w_pde, self.w_bc) <= 0.0:
            raise ValueError("initial loss weights must be positive")
        if self.seed_val in (self.seed_init, self.seed_sample, self.seed_relobralo):
            raise ValueError("validation seed must differ from the training seeds")


@dataclass
class LossRecord:
    """One logged epoch.  Hard-formulation records carry no boundary loss."""

    epoch: int
    stage: int
    l_pde: float
    l_bc: float | None
    w_pde: float
    w_bc: float | None
    total: float
    pde_rmse_train: float
    pde_rmse_val: float
    ref_rmse: float | None
    wallclock_s: float


@dataclass
class TrainResult:
    field: object  # NetworkField | HardField at the lowest-validation checkpoint
    mlp: Mlp
    history: list
    config: TrainConfig
    problem: Problem
    best_val_epoch: int
    best_val_rmse: float
    best_stage1_epoch: int | None
    lift: LiftSpec | None
    admissibility: AdmissibilityReport
    warnings: list
    lbfgs_reports: list
    boundary_errors: np.ndarray | None
    diverged: bool = False

    @property
    def max_boundary_error(self) -> float | None:
        if self.boundary_errors is None or len(self.boundary_errors) == 0:
            return None
        return float(np.max(self.boundary_errors))


# ---------------------------------------------------------------------------
# loss assembly
# ---------------------------------------------------------------------------

def soft_losses(field_obj, context: PhysicalContext, interior: PointCloud, boundary: PointCloud, b) -> tuple[float, float]:
    """(mean squared residual, mean squared boundary misfit) for any field."""
    if len(interior) == 0 or len(boundary) == 0:
        raise ValueError("interior and boundary clouds must be nonempty")
    l_pde = residual_rmse(field_obj, context, interior) ** 2
    misfit = field_obj.value(boundary.x) - np.asarray(b, dtype=float)
    return float(l_pde), float(np.mean(misfit * misfit))


def _residual_bar_rows(S11, S22, S12, p1, p2):
    """d(residual)/d(jet component) in the (f, f1, f2, f11, f12, f22) order."""
    zeros = np.zeros_like(S11)
    return np.stack([zeros, -p1, -p2, S22, 2.0 * S12, S11])


class _InteriorBatch:
    """Interior cloud with cached PDE coefficients and (hard only) D/G jets."""

    def __init__(self, cloud, context, domain=None, lift=None):
        self.x = cloud.x
        S11, S22, S12, p1, p2, q = context.coefficients(cloud.x)
        self.q = q
        self.rows = _residual_bar_rows(S11, S22, S12, p1, p2)  # (6, n)
        self.S = (S11, S22, S12)
        self.p = (p1, p2)
        if lift is not None:
            self.d6 = np.stack(distance_eval(domain, cloud.x))
            self.g6 = np.stack(lift_eval(lift, cloud.x))
        else:
            self.d6 = self.g6 = None

    def __len__(self):
        return self.x.shape[0]


def _pde_loss_grad(mlp: Mlp, batch: _InteriorBatch, weight: float):
    """(mean r^2, gradient of weight*mean r^2) in fixed-chunk accumulation order."""
    n = len(batch)
    grad = np.zeros(mlp.n_params)
    sum_sq = 0.0
    for start in range(0, n, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n))
        jet, cache = forward_jet(mlp, batch.x[sl], need_cache=True)
        if batch.d6 is not None:
            f6 = combine_jets(batch.d6[:, sl], jet.as_array(), batch.g6[:, sl])
            jet = Jet(*f6)
        r = pde_residual(jet, [s[sl] for s in batch.S], [p[sl] for p in batch.p], batch.q[sl])
        sum_sq += float(r @ r)
        jet_bar = (2.0 * weight / n) * r * batch.rows[:, sl]
        if batch.d6 is not None:
            jet_bar = combine_adjoint(batch.d6[:, sl], jet_bar)
        grad += backward_jet(mlp, cache, jet_bar)
    return sum_sq / n, grad


def _bc_loss_grad(mlp: Mlp, xb: np.ndarray, b: np.ndarray, weight: float):
    values, cache = forward_value(mlp, xb, need_cache=True)
    misfit = values - b
    l_bc = float(np.mean(misfit * misfit))
    grad = backward_value(mlp, cache, (2.0 * weight / xb.shape[0]) * misfit)
    return l_bc, grad


# ---------------------------------------------------------------------------
# ReLoBRaLo
# ---------------------------------------------------------------------------

def _softmax(v: np.ndarray) -> np.ndarray:
    z = np.exp(v - np.max(v))
    return z / z.sum()


def relobralo_update(
    prev_weights,
    loss_now,
    loss_prev,
    loss_ref,
    rng,
    alpha: float = 0.999,
    rho: float = 0.8,
    tau: float = 2.0,
    eps: float = 1e-12,
):
    """EMA blend of softmax-of-loss-ratio weights with a random lookback epoch.

    Tentative weights are n * softmax(L_i(t) / (tau * L_i(t') + eps)) with t'
    the previous epoch with probability rho, the initial epoch otherwise; the
    return value is alpha * prev + (1 - alpha) * tentative.
    """
    prev = np.asarray(prev_weights, dtype=float)
    now = np.asarray(loss_now, dtype=float)
    lookback_prev = np.asarray(loss_prev, dtype=float)
    lookback_ref = np.asarray(loss_ref, dtype=float)
    if not (now.shape == lookback_prev.shape == lookback_ref.shape == prev.shape):
        raise ValueError("weight and loss vectors must share one length")
    if np.any(now <= 0.0) or np.any(lookback_prev <= 0.0) or np.any(lookback_ref <= 0.0):
        raise ValueError("relobralo requires strictly positive losses")
    use_prev = as_rng(rng).random() < rho
    denom = lookback_prev if use_prev else lookback_ref
    tentative = now.size * _softmax(now / (tau * denom + eps))
    return alpha * prev + (1.0 - alpha) * tentative


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def _draw_clouds(domain, profile, config, rng):
    interior = sample_interior(domain, config.n_pde, rng)
    boundary = sample_boundary_uniform(domain, config.n_bc, rng)
    if domain.kind != "rectangle" and config.n_bc_curv > 0:
        extra = sample_boundary_curvature(domain, profile, config.n_bc_curv, rng)
        ring = None
        if boundary.ring is not None:
            ring = np.concatenate([boundary.ring, extra.ring])
        boundary = PointCloud(
            np.vstack([boundary.x, extra.x]),
            "boundary",
            param=np.concatenate([boundary.param, extra.param]),
            ring=ring,
        )
    b = boundary_height(domain, profile, boundary)
    return interior, boundary, b


def _resample_due(epoch: int, k) -> bool:
    if epoch == 0:
        return True
    return np.isfinite(k) and epoch % int(k) == 0


def _build_field(formulation, mlp, domain, lift):
    if formulation == "hard":
        return HardField(mlp, domain, lift)
    return NetworkField(mlp)


def validate_pde(field_obj, context: PhysicalContext, domain: DomainSpec, n_val: int, seed) -> float:
    """PDE-RMSE on a freshly drawn interior cloud held fixed by the seed."""
    if n_val <= 0:
        raise ValueError("n_val must be positive")
    cloud = sample_interior(domain, n_val, as_rng(seed))
    return residual_rmse(field_obj, context, cloud)


def train(config: TrainConfig, problem: Problem, oracle=None, workdir=None) -> TrainResult:
    """Run the two-stage protocol and return the lowest-validation checkpoint.

    ``oracle`` may expose ``value(x) -> f`` to add a reference-RMSE column to
    the history.  ``workdir`` enables on-disk artifacts: convergence CSV,
    best/last model checkpoints, and the lift descriptor.
    """
    config.validate()
    domain, airy, loads, profile = problem.domain, problem.airy, problem.loads, problem.profile
    context = problem.context()
    t0 = time.perf_counter()

    run_warnings: list[str] = []
    admissibility = check_admissibility(airy, loads, domain, n_samples=4096, rng=config.seed_val + 1)
    if not admissibility.passed:
        msg = (
            f"admissibility violated for sign '{airy.sign}': worst margin "
            f"{admissibility.worst_margin:.3e} at {admissibility.worst_point}"
        )
        run_warnings.append(msg)
        _warnings.warn(msg, RuntimeWarning, stacklevel=2)

    rng_sample = as_rng(config.seed_sample)
    rng_relo = as_rng(config.seed_relobralo)
    hard = config.formulation == "hard"
    lift = make_lift(domain, profile) if hard else None
    mlp = init_mlp(
        config.n_hidden,
        config.width,
        as_rng(config.seed_init),
        Normalization.for_domain(domain),
    )
    mlp.seed = config.seed_init
    params = mlp.to_vector()

    val_cloud = sample_interior(domain, config.n_val, as_rng(config.seed_val))
    oracle_vals = None
    if oracle is not None:
        oracle_vals = np.asarray(oracle.value(val_cloud.x), dtype=float)

    interior_batch = None
    xb = b = None

    def resample():
        nonlocal interior_batch, xb, b
        interior, boundary, b_new = _draw_clouds(domain, profile, config, rng_sample)
        interior_batch = _InteriorBatch(interior, context, domain, lift)
        xb, b = boundary.x, b_new

    def current_field():
        return _build_field(config.formulation, mlp, domain, lift)

    def monitor(l_pde):
        f = current_field()
        rmse_val = residual_rmse(f, context, val_cloud)
        ref = None
        if oracle_vals is not None:
            diff = f.value(val_cloud.x) - oracle_vals
            ref = float(np.sqrt(np.mean(diff * diff)))
        bd_err = None
        if hard:
            bd_err = float(np.max(np.abs(f.value(xb) - b)))
        return float(np.sqrt(l_pde)), rmse_val, ref, bd_err

    weights = np.array([config.w_pde, config.w_bc])
    loss_ref_vec = None
    loss_prev_vec = None

    def loss_and_grad(vec):
        """Total loss and its parameter gradient at the current clouds/weights."""
        mlp.set_vector(vec)
        if hard:
            l_pde, grad = _pde_loss_grad(mlp, interior_batch, 1.0)
            return l_pde, grad, l_pde, None
        l_pde, grad_pde = _pde_loss_grad(mlp, interior_batch, weights[0])
        l_bc, grad_bc = _bc_loss_grad(mlp, xb, b, weights[1])
        total = weights[0] * l_pde + weights[1] * l_bc
        return total, grad_pde + grad_bc, l_pde, l_bc

    history: list[LossRecord] = []
    boundary_errors: list[float] = []
    lbfgs_reports: list[LineSearchReport] = []
    best_val = np.inf
    best_val_epoch = -1
    best_val_params = params.copy()
    best_train = np.inf
    best_stage1_epoch = None
    diverged = False

    def record(epoch, stage, l_pde, l_bc, total, rmse_train, rmse_val, ref):
        rec = LossRecord(
            epoch=epoch,
            stage=stage,
            l_pde=float(l_pde),
            l_bc=None if l_bc is None else float(l_bc),
            w_pde=float(weights[0]) if not hard else 1.0,
            w_bc=None if hard else float(weights[1]),
            total=float(total),
            pde_rmse_train=rmse_train,
            pde_rmse_val=rmse_val,
            ref_rmse=ref,
            wallclock_s=time.perf_counter() - t0,
        )
        history.append(rec)
        return rec

    def push_best(epoch, rmse_val, vec):
        nonlocal best_val, best_val_epoch, best_val_params
        if rmse_val < best_val:
            best_val = rmse_val
            best_val_epoch = epoch
            best_val_params = vec.copy()

    def maybe_checkpoint(epoch, stage, vec, opt_payload):
        if workdir is None or config.checkpoint_every <= 0:
            return
        if epoch % config.checkpoint_every != 0:
            return
        path = Path(workdir) / f"ckpt_{epoch:07d}.npz"
        _atomic_savez(path, params=vec, epoch=epoch, stage=stage, **opt_payload)

    # ---- Stage 1: Adam ----
    adam = AdamState.zeros(params.size)
    epoch = 0
    try:
        for epoch in range(config.e_adam):
            if _resample_due(epoch, config.k_resample):
                resample()
            total, grad, l_pde, l_bc = loss_and_grad(params)
            if not np.isfinite(total) or total > _DIVERGENCE_CAP:
                raise FloatingPointError(f"training loss diverged at epoch {epoch}")
            if not hard:
                now = np.array([l_pde, l_bc])
                if loss_ref_vec is None:
                    loss_ref_vec = now.copy()
                elif np.all(now > 0.0):
                    weights = relobralo_update(
                        weights,
                        now,
                        loss_prev_vec,
                        loss_ref_vec,
                        rng_relo,
                        config.relobralo_alpha,
                        config.relobralo_rho,
                        config.relobralo_tau,
                    )
                    total = weights[0] * l_pde + weights[1] * l_bc
                loss_prev_vec = now
            rmse_train, rmse_val, ref, bd_err = monitor(l_pde)
            record(epoch, 1, l_pde, l_bc, l_pde if hard else total, rmse_train, rmse_val, ref)
            if bd_err is not None:
                boundary_errors.append(bd_err)
            push_best(epoch, rmse_val, params)
            if total < best_train:
                best_train = total
                best_stage1_epoch = epoch
                best_stage1_params = params.copy()
            maybe_checkpoint(epoch, 1, params, {"adam_m": adam.m, "adam_v": adam.v, "adam_t": adam.t})
            params = adam_step(adam, params, grad, config.eta_adam)
    except FloatingPointError as err:
        run_warnings.append(f"stage 1 aborted: {err}")
        _warnings.warn(run_warnings[-1], RuntimeWarning, stacklevel=2)
        diverged = True

    # ---- Stage 2: L-BFGS from the best Stage-1 checkpoint ----
    if config.e_adam > 0 and best_stage1_epoch is not None:
        params = best_stage1_params.copy()
    lbfgs = LbfgsState(m=config.lbfgs_m)
    if config.e_lbfgs > 0 and not diverged:
        def closure(vec):
            total, grad, _, _ = loss_and_grad(vec)
            return total, grad

        try:
            f0 = g0 = None
            for j in range(config.e_lbfgs):
                epoch = config.e_adam + j
                if _resample_due(epoch, config.k_resample):
                    resample()
                    lbfgs.flush()  # objective changed with the cloud
                    f0 = g0 = None
                if f0 is None:
                    f0, g0 = closure(params)
                params, f0, g0, report = lbfgs_step(
                    lbfgs, params, closure, f0, g0, config.c1, config.c2, 1.0, 25
                )
                lbfgs_reports.append(report)
                if not np.isfinite(f0) or f0 > _DIVERGENCE_CAP:
                    raise FloatingPointError(f"training loss diverged at epoch {epoch}")
                mlp.set_vector(params)
                if hard:
                    l_pde, l_bc = f0, None
                    total = f0
                else:
                    l_pde, l_bc = soft_losses(
                        current_field(),
                        context,
                        PointCloud(interior_batch.x, "interior"),
                        PointCloud(xb, "boundary"),
                        b,
                    )
                    total = weights[0] * l_pde + weights[1] * l_bc
                rmse_train, rmse_val, ref, bd_err = monitor(l_pde)
                record(epoch, 2, l_pde, l_bc, total, rmse_train, rmse_val, ref)
                if bd_err is not None:
                    boundary_errors.append(bd_err)
                push_best(epoch, rmse_val, params)
                maybe_checkpoint(epoch, 2, params, {})
        except FloatingPointError as err:
            run_warnings.append(f"stage 2 aborted: {err}")
            _warnings.warn(run_warnings[-1], RuntimeWarning, stacklevel=2)
            diverged = True

    if best_val_epoch < 0:  # no epoch ran; fall back to the initial parameters
        best_val_params = params
        mlp.set_vector(params)
        best_val = residual_rmse(current_field(), context, val_cloud)
        best_val_epoch = 0

    mlp.set_vector(best_val_params)
    result = TrainResult(
        field=current_field(),
        mlp=mlp,
        history=history,
        config=config,
        problem=problem,
        best_val_epoch=best_val_epoch,
        best_val_rmse=float(best_val),
        best_stage1_epoch=best_stage1_epoch,
        lift=lift,
        admissibility=admissibility,
        warnings=run_warnings,
        lbfgs_reports=lbfgs_reports,
        boundary_errors=np.array(boundary_errors) if hard else None,
        diverged=diverged,
    )
    if workdir is not None:
        _write_artifacts(result, Path(workdir))
    return result


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_convergence_csv(history, path) -> None:
    """One row per epoch; floats via repr so equal runs give equal bytes."""
    lines = [",".join(CSV_COLUMNS)]
    for rec in history:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    rec.epoch,
                    rec.stage,
                    rec.l_pde,
                    rec.l_bc,
                    rec.w_pde,
                    rec.w_bc,
                    rec.total,
                    rec.pde_rmse_train,
                    rec.pde_rmse_val,
                    rec.ref_rmse,
                    rec.wallclock_s,
                )
            )
        )
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_savez(path: Path, **arrays) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def _atomic_save_model(mlp: Mlp, base: Path) -> None:
    tmp = base.with_name(base.name + "_tmp")
    save_params(mlp, tmp)
    for ext in (".json", ".bin"):
        os.replace(tmp.with_suffix(ext), base.with_suffix(ext))


def _write_artifacts(result: TrainResult, workdir: Path) -> None:
    workdir.mkdir(parents=True, exist_ok=True)
    write_convergence_csv(result.history, workdir / "convergence.csv")
    _atomic_save_model(result.mlp, workdir / "model_best")
    if result.lift is not None:
        _atomic_write_text(workdir / "lift.json", result.lift.to_json())
    _atomic_write_text(workdir / "admissibility.json", result.admissibility.to_json())
