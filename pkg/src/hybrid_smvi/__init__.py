"""Hybrid projection method for split monotone variational inclusions."""

from .core import (
    Ball,
    Box,
    DimensionError,
    DykstraNonConvergence,
    EmptySetError,
    HalfSpace,
    Intersection,
    LinearMap,
    Point,
    ProjectionError,
    WholeSpace,
    apply,
    apply_adjoint,
    build_cn_halfspace,
    build_qn_halfspace,
    estimate_operator_norm,
    inner,
    norm,
    project,
    project_intersection,
)
from .diagnostics import (
    ProbeSet,
    check_remark5_chain,
    check_simple_proof_bound,
    condition_report,
    continuity_monitor_S,
    weak_probe,
)
from .problems import make_box_feasibility, make_l1_denoise, make_planted_singleton
from .solver import (
    ConfigError,
    Constant,
    Harmonic,
    PowerDecay,
    ProblemSpec,
    SolverConfig,
    run,
    step,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "Box",
    "ConfigError",
    "Constant",
    "DimensionError",
    "DykstraNonConvergence",
    "EmptySetError",
    "HalfSpace",
    "Harmonic",
    "Intersection",
    "LinearMap",
    "Point",
    "PowerDecay",
    "ProbeSet",
    "ProblemSpec",
    "ProjectionError",
    "SolverConfig",
    "WholeSpace",
    "apply",
    "apply_adjoint",
    "build_cn_halfspace",
    "build_qn_halfspace",
    "check_remark5_chain",
    "check_simple_proof_bound",
    "condition_report",
    "continuity_monitor_S",
    "estimate_operator_norm",
    "inner",
    "make_box_feasibility",
    "make_l1_denoise",
    "make_planted_singleton",
    "norm",
    "project",
    "project_intersection",
    "run",
    "step",
    "validate_config",
    "weak_probe",
]
