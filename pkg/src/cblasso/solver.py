"""Concomitant Beurling Lasso: joint estimation of a spike train and the noise level.

Given ``y = F_n(mu0) + noise`` the estimator solves::

    min_{mu, sigma > 0}  ||y - F_n(mu)||^2 / (2 n sigma) + sigma / 2 + lam ||mu||_TV

through its dual, a semidefinite program whose solution ``c_hat`` defines the
dual polynomial ``p_hat = F_n^*(c_hat)``. The support of ``mu_hat`` is where
``|p_hat| = 1``; amplitudes and ``sigma_hat`` then follow from an alternating
closed-form minimization on that support.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .measures import AtomicMeasure, FourierOperator, fourier_coefficients, vector_to_json
from .sdp import ConicProblem, ConicSolution, SolverConfig, SolverStatus, solve_conic
from .trig import DEFAULT_EPS_SUPPORT, RootSet, TrigPoly, eval_grid, sup_modulus, unit_modulus_roots

logger = logging.getLogger(__name__)

#: sigma_hat below this marks the overfitting regime
SIGMA_ZERO = 1e-10
#: condition number of X^* X above which a ridge is added
COND_LIMIT = 1e12


class Regime(str, Enum):
    OVERFITTING = "overfitting"
    INTERIOR = "interior"
    NULL = "null"


class NonConvergenceError(RuntimeError):
    """Raised when the dual solver stops before reaching its tolerance and ``strict`` is set."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class CBLassoConfig:
    """Settings of the estimator.

    Exactly one of ``lam`` and ``lambda_frac`` must be given; ``lambda_frac``
    selects ``lam = lambda_frac * lambda_max(y)``.

    Args:
        lam: Tuning parameter.
        lambda_frac: Fraction of ``lambda_max(y)`` in ``(0, 1]``.
        tol_sigma: Stopping tolerance on successive noise-level iterates.
        max_iter: Cap on alternating-minimization iterations.
        eps_support: Threshold on ``1 - |p_hat|^2`` for support points.
        compute_lambda_min: Also solve the unpenalized problem to get ``lambda_min(y)``.
        penalty_scale: Factor ``kappa`` in the amplitude step
            ``a = X^+ y - kappa lam sigma (X^* X)^{-1} zeta``. ``None`` uses ``n``,
            which is what the first-order conditions of the objective require.
        prune_phases: Drop atoms whose amplitude points against ``p_hat`` and refit.
        strict: Raise :class:`NonConvergenceError` if the dual solver hits its cap.
        solver: Conic solver settings.
    """

    lam: float | None = None
    lambda_frac: float | None = None
    tol_sigma: float = 1e-4
    max_iter: int = 1000
    eps_support: float = DEFAULT_EPS_SUPPORT
    compute_lambda_min: bool = False
    penalty_scale: float | None = None
    prune_phases: bool = True
    strict: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if (self.lam is None) == (self.lambda_frac is None):
            raise ValueError("set exactly one of lam and lambda_frac")
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive and finite, got {self.lam!r}")
        if self.lambda_frac is not None and not (0 < self.lambda_frac <= 1):
            raise ValueError(f"lambda_frac must lie in (0, 1], got {self.lambda_frac!r}")
        if not (self.tol_sigma > 0 and self.eps_support > 0):
            raise ValueError("tol_sigma and eps_support must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.penalty_scale is not None and self.penalty_scale < 0:
            raise ValueError("penalty_scale must be nonnegative")


@dataclass(frozen=True)
class DualSolution:
    """Solution ``c_hat`` of the dual program and its polynomial ``p_hat``."""

    c_hat: NDArray[np.complex128]
    poly: TrigPoly
    lam: float
    sup_norm: float
    ball_value: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def objective(self, y: ArrayLike) -> float:
        return dual_objective(y, self.c_hat, self.lam)


@dataclass(frozen=True)
class CBLassoResult:
    mu_hat: AtomicMeasure
    sigma_hat: float
    lambda_used: float
    regime: Regime
    kkt_residual: float
    iterations: int
    c_hat: NDArray[np.complex128]
    support_residuals: NDArray[np.float64]
    lambda_max: float
    lambda_min: float | None = None
    flags: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambda_hat(self) -> float:
        return self.lambda_used * self.sigma_hat

    @property
    def dual_poly(self) -> TrigPoly:
        return TrigPoly(self.c_hat)

    def to_json(self) -> dict:
        return {
            "regime": self.regime.value,
            "sigma_hat": self.sigma_hat,
            "lambda": self.lambda_used,
            "lambda_hat": self.lambda_hat,
            "lambda_max": self.lambda_max,
            "lambda_min": self.lambda_min,
            "measure": self.mu_hat.to_json(),
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "support_residuals": self.support_residuals.tolist(),
            "c_hat": vector_to_json(self.c_hat),
            "flags": list(self.flags),
            "diagnostics": _jsonable(self.diagnostics),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Enum):
        return obj.value
    return obj


def _check_y(op: FourierOperator, y: ArrayLike) -> NDArray[np.complex128]:
    y = np.asarray(y, dtype=complex)
    if y.shape != (op.n,):
        raise ValueError(f"expected {op.n} observations, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations contain non-finite values")
    if not np.any(y):
        raise ValueError("observation vector is zero")
    return y


def lambda_max(op: FourierOperator, y: ArrayLike) -> float:
    """Smallest ``lam`` above which ``mu_hat = 0``: ``||F^* y||_inf / (sqrt(n) ||y||)``."""
    y = _check_y(op, y)
    return sup_modulus(TrigPoly(y))[0] / (np.sqrt(op.n) * np.linalg.norm(y))


def primal_objective(
    op: FourierOperator, y: ArrayLike, mu: AtomicMeasure, sigma: float, lam: float
) -> float:
    """Value of the joint objective at ``(mu, sigma)``; ``sigma = 0`` is taken as a limit."""
    r = np.asarray(y, dtype=complex) - fourier_coefficients(op, mu)
    rss = float(np.vdot(r, r).real)
    if sigma <= 0:
        return lam * mu.tv_norm() if rss == 0 else np.inf
    return rss / (2 * op.n * sigma) + sigma / 2 + lam * mu.tv_norm()


def dual_objective(y: ArrayLike, c: ArrayLike, lam: float) -> float:
    return float(lam * np.vdot(c, y).real)


def _dual_from_conic(
    y: NDArray, lam: float, sol_c: NDArray, diagnostics: dict, converged: bool
) -> DualSolution:
    poly = TrigPoly(sol_c)
    sup, _ = sup_modulus(poly)
    c = sol_c
    if sup > 1.0:
        # pull slightly infeasible solver output back onto the constraint set
        c = c / sup
        poly = TrigPoly(c)
        diagnostics = {**diagnostics, "rescaled_by": sup}
        sup = 1.0
    n = c.size
    return DualSolution(
        c_hat=c,
        poly=poly,
        lam=lam,
        sup_norm=sup,
        ball_value=float(n * lam**2 * np.vdot(c, c).real),
        converged=converged,
        diagnostics=diagnostics,
    )


def solve_dual(
    op: FourierOperator, y: ArrayLike, lam: float, cfg: CBLassoConfig | None = None
) -> DualSolution:
    """Maximize ``lam Re <y, c>`` over ``||F^* c||_inf <= 1`` and ``||c|| <= 1 / (lam sqrt(n))``.

    Above ``lambda_max(y)`` the ball constraint alone binds and the closed form
    ``c = y / (sqrt(n) lam ||y||)`` is returned without calling the conic solver.
    """
    cfg = cfg or CBLassoConfig(lambda_frac=1.0)
    y = _check_y(op, y)
    if not (lam > 0 and np.isfinite(lam)):
        raise ValueError(f"lam must be positive and finite, got {lam!r}")
    n = op.n
    r = 1.0 / (lam * np.sqrt(n))
    ny = np.linalg.norm(y)
    closed = y * (r / ny)
    sup_closed, _ = sup_modulus(TrigPoly(closed))
    if sup_closed <= 1.0:
        return _dual_from_conic(y, lam, closed, {"method": "closed-form"}, True)
    sol = solve_conic(ConicProblem(y, r), cfg.solver)
    _raise_if_needed(sol, cfg)
    return _dual_from_conic(y, lam, sol.c, {"method": "conic", **sol.diagnostics()}, sol.converged)


def _raise_if_needed(sol: ConicSolution, cfg: CBLassoConfig) -> None:
    if sol.status is not SolverStatus.CONVERGED and cfg.strict:
        raise NonConvergenceError(
            f"dual solver stopped after {sol.iterations} iterations", sol.diagnostics()
        )


def solve_bme(
    op: FourierOperator, y: ArrayLike, cfg: CBLassoConfig | None = None
) -> tuple[NDArray[np.complex128], float]:
    """Dual of the unpenalized interpolation problem and ``lambda_min(y) = 1 / (||c|| sqrt(n))``."""
    cfg = cfg or CBLassoConfig(lambda_frac=1.0)
    y = _check_y(op, y)
    sol = solve_conic(ConicProblem(y, np.inf), cfg.solver)
    _raise_if_needed(sol, cfg)
    c = sol.c
    sup, _ = sup_modulus(TrigPoly(c))
    if sup > 1.0:
        c = c / sup
    return c, float(1.0 / (np.linalg.norm(c) * np.sqrt(op.n)))


def extract_support(dual: DualSolution, cfg: CBLassoConfig | None = None) -> RootSet:
    """Points where ``|p_hat|`` reaches one.

    Raises:
        ConstantModulusError: if ``|p_hat|`` is numerically constant.
    """
    eps = cfg.eps_support if cfg else DEFAULT_EPS_SUPPORT
    return unit_modulus_roots(dual.poly, eps)


@dataclass(frozen=True)
class _Design:
    X: NDArray[np.complex128]
    pinv_y: NDArray[np.complex128]
    gram_inv_zeta: NDArray[np.complex128]
    ridged: bool


def _design(op: FourierOperator, y: NDArray, support: NDArray, zeta: NDArray) -> _Design:
    X = op.design(support)
    G = X.conj().T @ X
    ridged = bool(np.linalg.cond(G) > COND_LIMIT)
    if ridged:
        G = G + 1e-10 * np.trace(G).real / G.shape[0] * np.eye(G.shape[0])
    rhs = np.column_stack([X.conj().T @ y, zeta])
    sol = np.linalg.solve(G, rhs)
    return _Design(X, sol[:, 0], sol[:, 1], ridged)


def amplitude_step(design: _Design, shrink: float) -> NDArray[np.complex128]:
    """``a = X^+ y - shrink (X^* X)^{-1} zeta``; shared by both estimators."""
    return design.pinv_y - shrink * design.gram_inv_zeta


def alternating_minimization(
    op: FourierOperator,
    y: ArrayLike,
    support: ArrayLike,
    lam: float,
    zeta: ArrayLike,
    cfg: CBLassoConfig | None = None,
    sigma_init: float | None = None,
) -> tuple[NDArray[np.complex128], float, int, dict]:
    """Alternate the closed-form amplitude and noise updates on a fixed support.

    Args:
        op: Sampling operator.
        y: Observations.
        support: Support points ``t_j``.
        lam: Tuning parameter.
        zeta: Unit-modulus phases ``p_hat(t_j)``.
        cfg: Estimator settings (``tol_sigma``, ``max_iter``, ``penalty_scale``).
        sigma_init: Starting noise level; defaults to ``||y|| / sqrt(n)``. With
            ``max_iter = 1`` the amplitudes are the fixed-noise-level solution.

    Returns:
        ``(amplitudes, sigma_hat, iterations, info)`` where ``sigma_hat`` is the
        noise update evaluated at the returned amplitudes.
    """
    cfg = cfg or CBLassoConfig(lam=lam)
    y = np.asarray(y, dtype=complex)
    support = np.atleast_1d(np.asarray(support, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if support.size == 0:
        raise ValueError("support is empty")
    if support.size > op.n:
        raise ValueError(f"support size {support.size} exceeds n = {op.n}")
    kappa = op.n if cfg.penalty_scale is None else cfg.penalty_scale
    d = _design(op, y, support, zeta)
    sn = np.sqrt(op.n)
    sigma = np.linalg.norm(y) / sn if sigma_init is None else float(sigma_init)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        a = amplitude_step(d, kappa * lam * sigma)
        new = np.linalg.norm(y - d.X @ a) / sn
        delta = abs(new - sigma)
        sigma = new
        if delta < cfg.tol_sigma:
            converged = True
            break
    info = {"converged": converged, "ridged": d.ridged}
    return a, float(sigma), it, info


def kkt_residual(
    op: FourierOperator, y: ArrayLike, mu: AtomicMeasure, sigma: float, lam: float, c: ArrayLike
) -> float:
    """``sup_t |(1/n) F^*(y - F mu)(t) - lam sigma p_hat(t)|`` on a dense grid."""
    r = np.asarray(y, dtype=complex) - fourier_coefficients(op, mu)
    g = r / op.n - lam * sigma * np.asarray(c, dtype=complex)
    return float(np.abs(eval_grid(TrigPoly(g), max(4096, 4 * op.n))).max())


def _resolve_lambda(op: FourierOperator, y: NDArray, cfg: CBLassoConfig) -> tuple[float, float]:
    lmax = lambda_max(op, y)
    lam = cfg.lam if cfg.lam is not None else cfg.lambda_frac * lmax
    return float(lam), float(lmax)


def solve_pipeline(op: FourierOperator, y: ArrayLike, cfg: CBLassoConfig) -> CBLassoResult:
    """Run the full estimator: regime check, dual solve, support, amplitudes and noise level."""
    y = _check_y(op, y)
    lam, lmax = _resolve_lambda(op, y, cfg)
    n = op.n
    flags: list[str] = []
    diagnostics: dict = {}

    lmin = None
    if cfg.compute_lambda_min:
        _, lmin = solve_bme(op, y, cfg)

    if lam > lmax:
        c = y / (np.sqrt(n) * lam * np.linalg.norm(y))
        sigma = float(np.linalg.norm(y) / np.sqrt(n))
        mu = AtomicMeasure.empty()
        return CBLassoResult(
            mu_hat=mu,
            sigma_hat=sigma,
            lambda_used=lam,
            regime=Regime.NULL,
            kkt_residual=kkt_residual(op, y, mu, sigma, lam, c),
            iterations=0,
            c_hat=c,
            support_residuals=np.zeros(0),
            lambda_max=lmax,
            lambda_min=lmin,
        )

    dual = solve_dual(op, y, lam, cfg)
    diagnostics["dual"] = dual.diagnostics
    if not dual.converged:
        flags.append("dual-not-converged")
    roots = extract_support(dual, cfg)
    if roots.dropped_seeds.size:
        flags.append("newton-seeds-dropped")

    overfit = lmin is not None and lam <= lmin
    t = roots.points
    res = roots.residuals
    iterations = 0
    if t.size == 0:
        flags.append("empty-support")
        mu, sigma = AtomicMeasure.empty(), float(np.linalg.norm(y) / np.sqrt(n))
    elif overfit:
        X = op.design(t)
        a = np.linalg.lstsq(X, y, rcond=None)[0]
        diagnostics["interpolation_residual"] = float(np.linalg.norm(y - X @ a) / np.sqrt(n))
        mu, sigma = AtomicMeasure(t, a), 0.0
    else:
        while True:
            zeta = dual.poly(t)
            zeta = zeta / np.abs(zeta)
            a, sigma, it, info = alternating_minimization(op, y, t, lam, zeta, cfg)
            iterations += it
            if not info["converged"]:
                flags.append("sigma-not-converged")
            if info["ridged"]:
                flags.append("ridge-added")
            bad = (np.conj(zeta) * a).real <= 0
            if not (cfg.prune_phases and bad.any()):
                break
            flags.append("phase-pruned")
            t, res = t[~bad], res[~bad]
            if t.size == 0:
                flags.append("empty-support")
                a, sigma = np.zeros(0, complex), float(np.linalg.norm(y) / np.sqrt(n))
                break
        mu = AtomicMeasure(t, a)

    if overfit or sigma < SIGMA_ZERO:
        regime = Regime.OVERFITTING
        sigma = 0.0 if overfit else sigma
    else:
        regime = Regime.INTERIOR
    return CBLassoResult(
        mu_hat=mu,
        sigma_hat=float(sigma),
        lambda_used=lam,
        regime=regime,
        kkt_residual=kkt_residual(op, y, mu, sigma, lam, dual.c_hat),
        iterations=iterations,
        c_hat=dual.c_hat,
        support_residuals=np.asarray(res, dtype=float),
        lambda_max=lmax,
        lambda_min=lmin,
        flags=tuple(dict.fromkeys(flags)),
        diagnostics=diagnostics,
    )


def with_lambda(cfg: CBLassoConfig, lam: float) -> CBLassoConfig:
    """Copy of ``cfg`` using an explicit ``lam``."""
    return replace(cfg, lam=lam, lambda_frac=None)
