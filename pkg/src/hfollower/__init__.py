"""Spectral-truncation laboratory for Hilbert-space monotone-follower control."""

from .costs import (
    CostEstimate,
    CostSpec,
    closed_form_null_cost,
    diagonal_quadratic,
    estimate_cost_functional,
    estimate_phi,
    rank_one,
    shifted_quadratic,
)
from .control import (
    CurveReflectionPolicy,
    ReflectionPolicy,
    ValueSample,
    directional_derivative_V,
    estimate_V,
    optimize_threshold,
    reflected_policy,
)
from .dynamics import (
    ConstantRatePolicy,
    ControlPath,
    OpenLoopControl,
    StatePath,
    ZeroPolicy,
    apply_control,
    decompose_control,
    simulate_uncontrolled,
)
from .grids import Grid1D, TimeGrid
from .mc import MCConfig
from .model import (
    AffineFunctional,
    SpectralModel,
    build_diagonal_model,
    phi_closed_form,
    resolvent_weight,
)
from .stopping import (
    LsmcSolution,
    StoppingSolution,
    smooth_fit_diagnostic,
    solve_lsmc,
    solve_vi_fd,
)

__version__ = "0.1.0"

__all__ = [
    "AffineFunctional", "ConstantRatePolicy", "ControlPath", "CostEstimate",
    "CostSpec", "CurveReflectionPolicy", "Grid1D", "LsmcSolution", "MCConfig",
    "OpenLoopControl", "ReflectionPolicy", "SpectralModel", "StatePath",
    "StoppingSolution", "TimeGrid", "ValueSample", "ZeroPolicy",
    "apply_control", "build_diagonal_model", "closed_form_null_cost",
    "decompose_control", "diagonal_quadratic", "directional_derivative_V",
    "estimate_V", "estimate_cost_functional", "estimate_phi",
    "optimize_threshold", "phi_closed_form", "rank_one", "reflected_policy",
    "shifted_quadratic", "simulate_uncontrolled", "smooth_fit_diagnostic",
    "solve_lsmc", "solve_vi_fd",
]
