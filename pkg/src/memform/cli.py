"""Command-line front door: solve, reference, check, compare, export, verify.

Exit codes: 0 success, 1 configuration error, 2 training divergence,
3 failed verification gate.  Diagnostics go to stderr; machine-readable
results (JSON) go to stdout or files under the configured output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, load_config, save_config
from .geometry import DomainSpec, sample_boundary_uniform, sample_interior
from .hard_bc import HardField, fit_annulus_lift, lift_eval, make_lift
from .network import (
    Mlp,
    Normalization,
    forward_jet,
    init_mlp,
    load_params,
    param_gradient,
)
from .optim import AdamState, LbfgsState, adam_step, lbfgs_step
from .postproc import (
    _atomic_write,
    export_principal,
    export_residual,
    export_surface,
    principal_stresses,
    report_metrics,
)
from .reference import (
    MANUFACTURED_CHOICES,
    compare_fields,
    comparison_cloud,
    fd_solve,
    fd_solve_rectangle,
    make_manufactured,
)
from .residual import Jet
from .stress import (
    AiryField,
    LoadModel,
    PointLoad,
    admissibility_margins,
    check_admissibility,
)
from .trainer import NetworkField, Problem, TrainConfig, relobralo_update, train

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_VERIFY = 3

_DEFAULT_MANUFACTURED = {
    "rectangle": "rect_arch_bump",
    "disk": "disk_bump",
    "annulus": "annulus_mix",
}


# ---------------------------------------------------------------------------
# problem assembly
# ---------------------------------------------------------------------------

def _resolve_problem(rc: RunConfig):
    """Return (problem, oracle).  A manufactured reference swaps in the induced
    forcing and the projected boundary profile so training targets f* exactly."""
    problem = rc.problem
    if rc.reference.kind == "manufactured":
        choice = rc.reference.choice or _DEFAULT_MANUFACTURED[problem.domain.kind]
        try:
            case = make_manufactured(problem.domain, problem.airy, problem.loads, choice)
        except ValueError as err:
            raise ConfigError(f"bad manufactured reference: {err}") from err
        problem = replace(problem, profile=case.profile, context_override=case.context)
        return problem, case
    return problem, None


def _fd_oracle(rc: RunConfig):
    if rc.problem.domain.kind != "rectangle":
        raise ConfigError("[reference] kind = fd requires a rectangle domain")
    return fd_solve_rectangle(
        rc.problem.domain,
        rc.problem.airy,
        rc.problem.loads,
        rc.problem.profile,
        rc.reference.nx,
        rc.reference.ny,
    )


def _field_from_model(rc: RunConfig, problem: Problem, model_base: str):
    mlp = load_params(model_base)
    if rc.train.formulation == "hard":
        return HardField(mlp, problem.domain, make_lift(problem.domain, problem.profile))
    return NetworkField(mlp)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_solve(args) -> int:
    rc = load_config(args.config)
    workdir = args.workdir or rc.outputs.resolved_directory()
    problem, oracle = _resolve_problem(rc)
    if oracle is None and rc.reference.kind == "fd":
        print("building finite-difference reference ...", file=sys.stderr)
        oracle = _fd_oracle(rc)
    result = train(rc.train, problem, oracle=oracle, workdir=workdir)
    os.makedirs(workdir, exist_ok=True)
    save_config(rc, os.path.join(workdir, "config.ini"))
    for fmt in rc.outputs.formats:
        export_surface(
            result.field,
            problem.domain,
            rc.outputs.grid,
            fmt,
            os.path.join(workdir, f"surface.{fmt}"),
        )
    points = comparison_cloud(problem.domain) if oracle is not None else None
    report = report_metrics(result, reference=oracle, points=points)
    _atomic_write(os.path.join(workdir, "report.json"), json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    if result.diverged:
        print("training diverged; artifacts hold the best checkpoint", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_reference(args) -> int:
    rc = load_config(args.config)
    workdir = args.workdir or rc.outputs.resolved_directory()
    os.makedirs(workdir, exist_ok=True)
    if rc.reference.kind == "fd":
        solution = _fd_oracle(rc)
        solution.to_csv(os.path.join(workdir, "reference.csv"))
        info = {
            "kind": "fd",
            "nx": rc.reference.nx,
            "ny": rc.reference.ny,
            "algebraic_residual": solution.algebraic_residual,
            "richardson_rel_error": solution.richardson_rel_error,
        }
    elif rc.reference.kind == "manufactured":
        problem, case = _resolve_problem(rc)
        export_surface(
            case,
            problem.domain,
            rc.outputs.grid,
            "csv",
            os.path.join(workdir, "reference.csv"),
        )
        _atomic_write(os.path.join(workdir, "manufactured.json"), case.to_json() + "\n")
        info = json.loads(case.to_json())
        info["kind"] = "manufactured"
    else:
        raise ConfigError("[reference] kind = none; nothing to build")
    print(json.dumps(info, indent=2))
    return EXIT_OK


def _cmd_check(args) -> int:
    rc = load_config(args.config)
    report = check_admissibility(
        rc.problem.airy,
        rc.problem.loads,
        rc.problem.domain,
        n_samples=args.samples,
        rng=np.random.default_rng(args.seed),
        seed_label=args.seed,
    )
    print(report.to_json())
    if args.out:
        _atomic_write(args.out, report.to_json() + "\n")
    # a failed verdict is a successful check; only config errors change the exit code
    return EXIT_OK


def _read_field_csv(path):
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as err:
        raise ConfigError(f"cannot read field CSV {path}: {err}") from err
    names = data.dtype.names
    if names is None or len(names) < 3 or names[0] != "x1" or names[1] != "x2":
        raise ConfigError(f"{path}: expected CSV header x1,x2,<value>")
    pts = np.column_stack([data["x1"], data["x2"]])
    return pts, np.asarray(data[names[2]], dtype=float)


def _cmd_compare(args) -> int:
    pts_a, fa = _read_field_csv(args.field_a)
    pts_b, fb = _read_field_csv(args.field_b)
    if pts_a.shape != pts_b.shape or not np.allclose(pts_a, pts_b, atol=1e-9, rtol=0.0):
        raise ConfigError("field CSVs sample different points; re-export on a common grid")
    diff = fa - fb
    rms_ref = float(np.sqrt(np.mean(fb**2)))
    if rms_ref == 0.0:
        raise ConfigError(f"{args.field_b}: reference field is identically zero")
    rmse = float(np.sqrt(np.mean(diff**2)))
    out = {
        "n_points": int(fa.size),
        "rmse": rmse,
        "rel_l2_percent": 100.0 * rmse / rms_ref,
        "max_abs": float(np.max(np.abs(diff))),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _parse_grid(text):
    try:
        nx, ny = text.lower().split("x")
        return int(nx), int(ny)
    except ValueError as err:
        raise ConfigError(f"bad grid {text!r}; expected NXxNY like 65x65") from err


def _cmd_export(args) -> int:
    rc = load_config(args.config)
    problem, _ = _resolve_problem(rc)
    grid = _parse_grid(args.grid) if args.grid else rc.outputs.grid
    if args.what == "principal":
        export_principal(problem.context(), problem.domain, grid, args.out)
        print(args.out)
        return EXIT_OK
    if not args.model:
        raise ConfigError(f"--model is required for --what {args.what}")
    try:
        field = _field_from_model(rc, problem, args.model)
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot load model {args.model}: {err}") from err
    if args.what == "surface":
        export_surface(field, problem.domain, grid, args.format, args.out)
    else:
        export_residual(field, problem.context(), problem.domain, grid, args.out)
    print(args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: the oracle battery
# ---------------------------------------------------------------------------

def _fd_jet(value_fn, x, h1=1e-5, h2=1e-4) -> Jet:
    """Central-difference jet of a scalar field; independent of the fused pass."""
    x = np.atleast_2d(np.asarray(x, dtype=float))

    def f(dx1, dx2):
        shifted = x + np.array([dx1, dx2])
        return np.asarray(value_fn(shifted), dtype=float)

    f0 = f(0.0, 0.0)
    f1 = (f(h1, 0) - f(-h1, 0)) / (2 * h1)
    f2 = (f(0, h1) - f(0, -h1)) / (2 * h1)
    f11 = (f(h2, 0) - 2 * f0 + f(-h2, 0)) / h2**2
    f22 = (f(0, h2) - 2 * f0 + f(0, -h2)) / h2**2
    f12 = (f(h2, h2) - f(h2, -h2) - f(-h2, h2) + f(-h2, -h2)) / (4 * h2**2)
    return Jet(f0, f1, f2, f11, f12, f22)


def _rel_err(got, want):
    scale = np.max(np.abs(want)) + 1e-12
    return float(np.max(np.abs(got - want)) / scale)


def _check_jets():
    worst = 0.0
    for i in range(5):
        rng = np.random.default_rng(100 + i)
        mlp = init_mlp(2, 16, rng, Normalization((0.0, 0.0), (1.0, 1.0)))
        x = rng.uniform(-1.0, 1.0, size=(40, 2))
        jet = forward_jet(mlp, x)
        ref = _fd_jet(lambda p: forward_jet(mlp, p).f, x)
        for name in ("f", "f1", "f2", "f11", "f12", "f22"):
            worst = max(worst, _rel_err(getattr(jet, name), getattr(ref, name)))
    return worst <= 1e-4, f"max jet error {worst:.2e} (tol 1e-4)"


def _quadratic_loss(jet):
    arr = jet if isinstance(jet, np.ndarray) else jet.as_array()
    n = arr.shape[1]
    loss = 0.5 * float(np.sum(arr**2)) / n
    return loss, arr / n


def _check_gradient():
    worst = 0.0
    for i in range(3):
        rng = np.random.default_rng(300 + i)
        mlp = init_mlp(2, 12, rng, Normalization((0.0, 0.0), (1.0, 1.0)))
        x = rng.uniform(-1.0, 1.0, size=(20, 2))
        _, grad = param_gradient(mlp, x, _quadratic_loss)
        d = rng.standard_normal(grad.size)
        d /= np.linalg.norm(d)
        eps = 1e-6
        theta = mlp.to_vector()

        def loss_at(v):
            probe = mlp.copy()
            probe.set_vector(v)
            return _quadratic_loss(forward_jet(probe, x))[0]

        fd = (loss_at(theta + eps * d) - loss_at(theta - eps * d)) / (2 * eps)
        ad = float(grad @ d)
        worst = max(worst, abs(ad - fd) / (abs(fd) + 1e-12))
    return worst <= 1e-5, f"max directional-derivative error {worst:.2e} (tol 1e-5)"


def _check_lbfgs_quadratic():
    worst = 0.0
    wolfe_ok = True
    for trial in range(3):
        rng = np.random.default_rng(70 + trial)
        d = 6
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        a = q @ np.diag(np.logspace(0, 2, d)) @ q.T
        b = rng.standard_normal(d)
        star = np.linalg.solve(a, b)

        def closure(theta):
            return 0.5 * theta @ a @ theta - b @ theta, a @ theta - b

        theta = np.zeros(d)
        state = LbfgsState()
        f0, g0 = closure(theta)
        for _ in range(d + 2):
            theta, f0, g0, rep = lbfgs_step(state, theta, closure, f0, g0)
            if rep.converged and rep.alpha > 0.0:
                armijo, curv = rep.wolfe_satisfied(1e-4, 0.9)
                wolfe_ok = wolfe_ok and armijo and curv
        worst = max(worst, float(np.max(np.abs(theta - star))))
    ok = worst <= 1e-10 and wolfe_ok
    return ok, f"quadratic error after d+2 iters {worst:.2e} (tol 1e-10), wolfe={wolfe_ok}"


def _check_adam():
    eta = 1e-3
    state = AdamState.zeros(1)
    theta = np.array([0.3])
    theta2 = adam_step(state, theta, np.array([3.0]), eta)
    first = abs((theta[0] - theta2[0]) - eta)
    state = AdamState.zeros(1)
    theta = np.array([2.0])
    for _ in range(2000):
        theta = adam_step(state, theta, 4.0 * theta, 0.05)
    ok = first <= 1e-6 and abs(theta[0]) <= 1e-8
    return ok, f"first step off by {first:.1e}, bowl end |x|={abs(theta[0]):.1e}"


def _stencil_clear(domain: DomainSpec, pts: np.ndarray, margin: float) -> np.ndarray:
    """Mask of points whose full stencil footprint stays strictly inside."""
    r = np.hypot(pts[:, 0], pts[:, 1])
    if domain.kind == "disk":
        return r <= domain.R - margin
    if domain.kind == "annulus":
        return (r >= domain.R_in + margin) & (r <= domain.R_out - margin)
    return (np.abs(pts[:, 0]) <= domain.l / 2 - margin) & (
        np.abs(pts[:, 1]) <= domain.b / 2 - margin
    )


def _stencil_laplacian(value_fn, pts: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order nine-point Laplacian; truncation ~ h^4 * G^(6) / 90."""
    lap = -60.0 * value_fn(pts)
    for axis in (0, 1):
        for step, coeff in ((h, 16.0), (-h, 16.0), (2 * h, -1.0), (-2 * h, -1.0)):
            shift = np.zeros(2)
            shift[axis] = step
            lap = lap + coeff * value_fn(pts + shift)
    return lap / (12.0 * h * h)


def _random_profile(rng, K=8):
    from .geometry import FourierProfile

    decay = 1.0 / (1.0 + np.arange(1, K + 1) ** 2)
    return FourierProfile(
        float(rng.uniform(0.5, 2.0)),
        tuple(rng.standard_normal(K) * decay),
        tuple(rng.standard_normal(K) * decay),
    )


def _check_lift():
    from .geometry import BoundaryProfile, boundary_height

    rng = np.random.default_rng(77)
    worst_b, worst_h = 0.0, 0.0
    cases = [
        (DomainSpec.disk(6.0), BoundaryProfile.disk_fourier(_random_profile(rng))),
        (
            DomainSpec.annulus(0.6, 6.0),
            BoundaryProfile.annulus_fourier(_random_profile(rng), _random_profile(rng)),
        ),
    ]
    h = 1e-3
    for domain, profile in cases:
        lift = make_lift(domain, profile)
        cloud = sample_boundary_uniform(domain, 400, rng)
        b = boundary_height(domain, profile, cloud)
        g = lift_eval(lift, cloud.x)[0]
        sup = float(np.max(np.abs(b)))
        worst_b = max(worst_b, float(np.max(np.abs(g - b))) / (1.0 + sup))
        interior = sample_interior(domain, 400, rng)
        pts = interior.x[_stencil_clear(domain, interior.x, 3.0 * h)]
        lap = _stencil_laplacian(lambda p: lift_eval(lift, p)[0], pts, h)
        g_sup = float(np.max(np.abs(lift_eval(lift, pts)[0])))
        worst_h = max(worst_h, float(np.max(np.abs(lap))) / g_sup)
    from .geometry import FourierProfile

    spec = fit_annulus_lift(
        FourierProfile(1.0, (), ()), FourierProfile(0.0, (), ()), 0.6, 6.0
    )
    b0_want = 1.0 / np.log(10.0)
    a0_want = 1.0 - b0_want * np.log(6.0)
    log_err = max(abs(spec.A0 - a0_want), abs(spec.B0 - b0_want))
    ok = worst_b <= 1e-10 and worst_h <= 1e-6 and log_err <= 1e-9
    return ok, (
        f"boundary {worst_b:.1e} (tol 1e-10), stencil laplacian {worst_h:.1e} "
        f"(tol 1e-6), k=0 coefficients off by {log_err:.1e} (tol 1e-9)"
    )


def _check_admissibility_equivalence(n=2000):
    rng = np.random.default_rng(5)
    s = rng.standard_normal((3, n))
    tensors = np.zeros((n, 2, 2))
    tensors[:, 0, 0] = s[0]
    tensors[:, 1, 1] = s[1]
    tensors[:, 0, 1] = tensors[:, 1, 0] = s[2]
    eigs = np.linalg.eigvalsh(tensors)
    disagreements = 0
    for sign, brute in (
        ("compression", eigs[:, 1] <= 0.0),
        ("tension", eigs[:, 0] >= 0.0),
    ):
        verdict = admissibility_margins(s[0], s[1], s[2], sign).min(axis=0) >= 0.0
        disagreements += int(np.sum(verdict != brute))
    return disagreements == 0, f"{disagreements} disagreements over {2 * n} verdicts"


def _check_fd():
    domain = DomainSpec.rectangle(13.0, 8.0)
    airy = AiryField(2.0, 0.0, 2.0, "compression")
    loads = LoadModel(rho=18.0, t=0.1, alpha_h=0.5, theta_h=np.pi / 4, ref=(-6.5, -4.0))
    para = make_manufactured(domain, airy, loads, "paraboloid")

    def bfun(x):
        return para.value(x)

    sol = fd_solve(domain, para.context, bfun, 33, 21)
    from .reference import _grid_points

    pts = _grid_points(sol.x1, sol.x2)
    exact_err = float(np.max(np.abs(sol.f.ravel() - para.value(pts))))

    case = make_manufactured(domain, airy, loads, "rect_fd_trig")
    errs = []
    for nx, ny in ((33, 21), (65, 41), (129, 81)):
        s = fd_solve(domain, case.context, lambda x: case.value(x), nx, ny)
        p = _grid_points(s.x1, s.x2)
        exact = case.value(p)
        errs.append(np.sqrt(np.mean((s.f.ravel() - exact) ** 2) / np.mean(exact**2)))
    slopes = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]
    ok = exact_err <= 1e-9 and all(1.8 <= sl <= 2.2 for sl in slopes)
    return ok, f"quadratic nodal error {exact_err:.1e} (tol 1e-9), slopes {slopes}"


def _verify_cases():
    """Manufactured verification cases, one per planform, mirroring the
    published parameter sets (stress, density, horizontal load direction)."""
    return [
        (
            DomainSpec.rectangle(13.0, 8.0),
            AiryField(2.0, 0.0, 2.0, "compression"),
            LoadModel(rho=18.0, t=0.1, alpha_h=0.5, theta_h=np.pi / 4, ref=(-6.5, -4.0)),
            "rect_arch_bump",
        ),
        (
            DomainSpec.disk(6.0),
            AiryField(5.0, 0.0, 5.0, "tension"),
            LoadModel(rho=10.0, t=0.1, alpha_h=0.5, theta_h=0.0, ref=(-6.0, 0.0)),
            "disk_bump",
        ),
        (
            DomainSpec.annulus(0.6, 6.0),
            AiryField(3.0, 0.0, 3.0, "compression"),
            LoadModel(rho=18.0, t=0.1, alpha_h=0.3, theta_h=np.pi / 2, ref=(0.0, -6.0)),
            "annulus_mix",
        ),
    ]


def _check_manufactured_residuals():
    worst = 0.0
    for domain, airy, loads, choice in _verify_cases():
        case = make_manufactured(domain, airy, loads, choice)
        rng = np.random.default_rng(11)
        cloud = sample_interior(domain, 2000, rng)
        jet = case.jet(cloud.x)
        s11, s22, s12, p1, p2, q = case.context.coefficients(cloud.x)
        res = s11 * jet.f22 + s22 * jet.f11 + 2 * s12 * jet.f12 - p1 * jet.f1 - p2 * jet.f2 - q
        scale = 1.0 + float(np.max(np.abs(q)))
        worst = max(worst, float(np.max(np.abs(res))) / scale)
        if case.projection_error > 1e-10:
            return False, f"{choice}: projection error {case.projection_error:.1e}"
    return worst <= 1e-11, f"max scaled residual {worst:.1e} (tol 1e-11)"


def _check_principal():
    rng = np.random.default_rng(17)
    s = rng.standard_normal((3, 2000))
    state = principal_stresses((s[0], s[1], s[2]))
    tensors = np.stack(
        [np.stack([s[0], s[2]], axis=-1), np.stack([s[2], s[1]], axis=-1)], axis=-2
    )
    worst = 0.0
    for sig, e in ((state.sigma1, state.e1), (state.sigma2, state.e2)):
        resid = np.einsum("nij,nj->ni", tensors, e) - sig[:, None] * e
        worst = max(worst, float(np.max(np.abs(resid))))
    shear = principal_stresses((0.0, 0.0, 1.0))
    inv = 1.0 / np.sqrt(2.0)
    example = (
        abs(shear.sigma1 - 1.0) < 1e-12
        and abs(shear.sigma2 + 1.0) < 1e-12
        and np.allclose(np.abs(shear.e1), (inv, inv), atol=1e-12)
    )
    ok = worst <= 1e-12 and example
    return ok, f"eigen-identity residual {worst:.1e} (tol 1e-12), pure-shear example {example}"


def _check_relobralo():
    rng = np.random.default_rng(0)
    # ratios (2, 1) at tau=2 put the softmax arguments at (1.0, 0.5)
    w = relobralo_update(
        np.array([1.0, 1.0]),
        np.array([2.0, 1.0]),
        np.array([1.0, 1.0]),
        np.array([1.0, 1.0]),
        rng,
        alpha=0.0,
        rho=1.0,
        tau=2.0,
    )
    want = np.array([1.24492, 0.75508])
    err = float(np.max(np.abs(w - want)))
    return err <= 1e-5, f"balanced weights off by {err:.1e} (tol 1e-5)"


def _check_config_roundtrip():
    from .geometry import BoundaryProfile

    domain = DomainSpec.rectangle(13.0, 8.0)
    rc = RunConfig(
        Problem(
            domain,
            AiryField(2.0, 0.0, 2.0, "compression"),
            LoadModel(
                rho=18.0,
                t=0.1,
                point_loads=(PointLoad(5.0, (-1.5, 0.0), 0.5),),
                alpha_h=0.5,
                theta_h=float(np.pi / 4),
                ref=(-6.5, -4.0),
            ),
            BoundaryProfile.rect_arch(2.0),
            name="verify-roundtrip",
        ),
        TrainConfig(formulation="hard"),
    )
    with tempfile.TemporaryDirectory() as td:
        p1, p2 = os.path.join(td, "a.ini"), os.path.join(td, "b.ini")
        save_config(rc, p1)
        save_config(load_config(p1), p2)
        with open(p1) as fh:
            s1 = fh.read()
        with open(p2) as fh:
            s2 = fh.read()
    return s1 == s2, "serialize -> parse -> serialize is byte-stable"


def desk_train_config(formulation: str = "hard", domain_kind: str = "rectangle", **overrides):
    """Down-scaled training budget that keeps desk runs to minutes on one core."""
    base = dict(
        formulation=formulation,
        n_hidden=3,
        width=64,
        e_adam=5000,
        e_lbfgs=0,
        n_pde=4096,
        n_bc=512,
        n_bc_curv=512 if domain_kind in ("disk", "annulus") else 0,
        n_val=2048,
    )
    base.update(overrides)
    return TrainConfig(**base)


def _check_manufactured_training(domain, airy, loads, choice):
    case = make_manufactured(domain, airy, loads, choice)
    problem = Problem(
        domain,
        airy,
        loads,
        case.profile,
        name=f"verify-{choice}",
        context_override=case.context,
    )
    config = desk_train_config("hard", domain.kind)
    result = train(config, problem, oracle=case)
    metrics = compare_fields(result.field, case, comparison_cloud(domain))
    rel = 100.0 * metrics.rel_l2
    ok = rel <= 0.5 and not result.diverged
    return ok, f"rel L2 {rel:.4f}% (gate 0.5%)"


_QUICK_CHECKS = [
    ("autodiff-jets", _check_jets),
    ("autodiff-gradient", _check_gradient),
    ("lbfgs-quadratic", _check_lbfgs_quadratic),
    ("adam-oracles", _check_adam),
    ("harmonic-lift", _check_lift),
    ("admissibility-equivalence", _check_admissibility_equivalence),
    ("fd-reference", _check_fd),
    ("manufactured-residuals", _check_manufactured_residuals),
    ("principal-stresses", _check_principal),
    ("loss-balancing-example", _check_relobralo),
    ("config-roundtrip", _check_config_roundtrip),
]


def _cmd_verify(args) -> int:
    checks = []
    if args.suite in ("quick", "all"):
        checks.extend(_QUICK_CHECKS)
    if args.suite in ("manufactured", "all"):
        for domain, airy, loads, choice in _verify_cases():
            checks.append(
                (
                    f"manufactured-{domain.kind}",
                    lambda d=domain, a=airy, lo=loads, c=choice: _check_manufactured_training(
                        d, a, lo, c
                    ),
                )
            )
    failures = 0
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as err:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(err).__name__}: {err}"
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} of {len(checks)} checks failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memform",
        description="Membrane form finding with physics-informed networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="train a network per config and write artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--workdir", help="override the configured output directory")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("reference", help="build the configured reference solution")
    p.add_argument("--config", required=True)
    p.add_argument("--workdir")
    p.set_defaults(fn=_cmd_reference)

    p = sub.add_parser("check", help="admissibility verdict for the configured stresses")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the JSON verdict to this path")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("compare", help="metrics between two exported field CSVs")
    p.add_argument("field_a")
    p.add_argument("field_b", help="treated as the reference for relative error")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("export", help="evaluate a saved model or context onto files")
    p.add_argument("--config", required=True)
    p.add_argument("--model", help="saved parameter base path (without extension)")
    p.add_argument("--what", choices=("surface", "residual", "principal"), default="surface")
    p.add_argument("--format", choices=("csv", "obj"), default="csv")
    p.add_argument("--grid", help="override resolution, e.g. 129x81")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_export)

    p = sub.add_parser("verify", help="run the self-verification battery")
    p.add_argument("--suite", choices=("quick", "manufactured", "all"), default="quick")
    p.set_defaults(fn=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
