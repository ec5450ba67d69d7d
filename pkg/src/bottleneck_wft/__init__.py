"""Exact wave-front tracking for LWR traffic with a moving bottleneck."""

from .fundamental import (
    ModelParams,
    constraint_level,
    critical_densities,
    flux,
    front_speed,
    psi,
    sv_speed,
    verify_psi_bounds,
)
from .mesh import DensityMesh, PiecewiseConstant, build_mesh, quantize
from .riemann import WaveFan, classical_solve, constrained_solve, evaluate
from .engine import Simulation, init, run, check_solution
from .tangent import (
    AncestorGraph,
    ShiftState,
    WeightVector,
    attach_shifts,
    backward_weights,
    propagate,
    verify_weight_bound,
    weighted_norm,
)

__all__ = [
    "ModelParams",
    "constraint_level",
    "critical_densities",
    "flux",
    "front_speed",
    "psi",
    "sv_speed",
    "verify_psi_bounds",
    "DensityMesh",
    "PiecewiseConstant",
    "build_mesh",
    "quantize",
    "WaveFan",
    "classical_solve",
    "constrained_solve",
    "evaluate",
    "Simulation",
    "init",
    "run",
    "check_solution",
    "AncestorGraph",
    "ShiftState",
    "WeightVector",
    "attach_shifts",
    "backward_weights",
    "propagate",
    "verify_weight_bound",
    "weighted_norm",
]
