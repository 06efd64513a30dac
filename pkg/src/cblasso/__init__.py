"""Off-the-grid sparse spike deconvolution with joint noise-level estimation."""

from __future__ import annotations

__version__ = "0.1.0"

from .blasso import BLassoResult, blasso_amplitudes, blasso_sigma_heuristic, fit_blasso
from .certificates import (
    Certificate,
    bregman_divergence,
    build_derivative_interpolant,
    build_interpolant,
    verify_certificate,
)
from .estimators import BLasso, CBLasso
from .experiments import ExperimentConfig, compatibility_curve, generate_instance, run_experiment
from .measures import AtomicMeasure, FourierOperator, fourier_coefficients, torus_distance, tv_norm
from .sdp import ConicProblem, ConicSolution, SolverConfig, psd_project, solve_conic
from .solver import (
    CBLassoConfig,
    CBLassoResult,
    DualSolution,
    NonConvergenceError,
    Regime,
    alternating_minimization,
    extract_support,
    lambda_max,
    solve_bme,
    solve_dual,
    solve_pipeline,
)
from .trig import (
    ConstantModulusError,
    RootSet,
    TrigPoly,
    eval_grid,
    l1_norm,
    modulus_squared,
    sup_modulus,
    unit_modulus_roots,
)

__all__ = [name for name in dir() if not name.startswith("_")]
