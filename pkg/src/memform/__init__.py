"""Mesh-free membrane form finding.

Equilibrium shapes of unilaterally stressed membranes (compression-only or
tension-only) are computed over a plan domain by training a neural surface
against the projected-equilibrium PDE, with prescribed Airy stresses and
vertical/horizontal load fields.  Dirichlet data is either penalized (soft)
or built into the ansatz exactly (hard).  Verification runs against finite
differences and manufactured solutions.
"""

from .config import ConfigError, OutputConfig, ReferenceConfig, RunConfig, load_config, save_config
from .geometry import (
    BoundaryProfile,
    DomainSpec,
    FourierProfile,
    PointCloud,
    boundary_height,
    sample_boundary_curvature,
    sample_boundary_uniform,
    sample_interior,
)
from .hard_bc import HardField, LiftSpec, distance_eval, lift_eval, make_lift
from .network import (
    Mlp,
    NetworkField,
    Normalization,
    forward_jet,
    forward_value,
    init_mlp,
    load_params,
    param_gradient,
    save_params,
)
from .optim import AdamState, LbfgsState, LineSearchReport, adam_step, lbfgs_step
from .postproc import (
    PrincipalState,
    export_principal,
    export_residual,
    export_surface,
    principal_stresses,
    report_metrics,
)
from .reference import (
    MANUFACTURED_CHOICES,
    CompareMetrics,
    GridSolution,
    ManufacturedCase,
    compare_fields,
    comparison_cloud,
    fd_solve,
    fd_solve_rectangle,
    make_manufactured,
)
from .residual import Jet, PhysicalContext, pde_residual, residual_rmse
from .stress import (
    AdmissibilityReport,
    AiryField,
    LoadModel,
    PointLoad,
    check_admissibility,
    cumulative_loads,
    horizontal_loads,
    projected_stresses,
    vertical_load,
)
from .trainer import (
    LossRecord,
    Problem,
    TrainConfig,
    TrainResult,
    relobralo_update,
    soft_losses,
    train,
    validate_pde,
    write_convergence_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AdmissibilityReport",
    "AiryField",
    "BoundaryProfile",
    "CompareMetrics",
    "ConfigError",
    "DomainSpec",
    "FourierProfile",
    "GridSolution",
    "HardField",
    "Jet",
    "LbfgsState",
    "LiftSpec",
    "LineSearchReport",
    "LoadModel",
    "LossRecord",
    "MANUFACTURED_CHOICES",
    "ManufacturedCase",
    "Mlp",
    "NetworkField",
    "Normalization",
    "OutputConfig",
    "PhysicalContext",
    "PointCloud",
    "PointLoad",
    "PrincipalState",
    "Problem",
    "ReferenceConfig",
    "RunConfig",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "boundary_height",
    "check_admissibility",
    "compare_fields",
    "comparison_cloud",
    "cumulative_loads",
    "distance_eval",
    "export_principal",
    "export_residual",
    "export_surface",
    "fd_solve",
    "fd_solve_rectangle",
    "forward_jet",
    "forward_value",
    "horizontal_loads",
    "init_mlp",
    "lbfgs_step",
    "lift_eval",
    "load_config",
    "load_params",
    "make_lift",
    "make_manufactured",
    "param_gradient",
    "pde_residual",
    "principal_stresses",
    "projected_stresses",
    "relobralo_update",
    "report_metrics",
    "residual_rmse",
    "sample_boundary_curvature",
    "sample_boundary_uniform",
    "sample_interior",
    "save_config",
    "save_params",
    "soft_losses",
    "train",
    "validate_pde",
    "vertical_load",
    "write_convergence_csv",
]
