"""Scikit-learn style estimators wrapping the solver and the baseline."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .blasso import fit_blasso
from .measures import AtomicMeasure, FourierOperator, fourier_coefficients
from .sdp import SolverConfig
from .solver import CBLassoConfig, CBLassoResult, solve_pipeline
from .trig import DEFAULT_EPS_SUPPORT, TrigPoly
from .validation import check_observations, check_positions


def _check_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class CBLasso(BaseEstimator):
    """Concomitant Beurling Lasso estimator.

    ``fit(y)`` takes the ``n = 2 fc + 1`` observed Fourier coefficients and
    estimates a spike train together with the noise level.

    Args:
        lambda_frac: Tuning parameter as a fraction of ``lambda_max(y)``.
        lam: Explicit tuning parameter; overrides ``lambda_frac``.
        tol_sigma: Stopping tolerance of the noise-level iteration.
        max_iter: Cap on noise-level iterations.
        eps_support: Threshold on ``1 - |p_hat|^2`` for support points.
        compute_lambda_min: Also compute ``lambda_min(y)`` (one more conic solve).
        penalty_scale: Factor in the amplitude step; ``None`` means ``n``.
        solver_tol: Conic solver tolerance.
        solver_max_iters: Conic solver iteration cap.
        strict: Raise on conic solver non-convergence.

    Attributes:
        measure_: Estimated :class:`AtomicMeasure`.
        sigma_: Estimated noise level.
        lambda_: Tuning parameter used.
        regime_: ``"overfitting"``, ``"interior"`` or ``"null"``.
        result_: Full :class:`CBLassoResult`.
    """

    def __init__(
        self,
        lambda_frac: float = 0.5,
        lam: float | None = None,
        tol_sigma: float = 1e-4,
        max_iter: int = 1000,
        eps_support: float = DEFAULT_EPS_SUPPORT,
        compute_lambda_min: bool = False,
        penalty_scale: float | None = None,
        solver_tol: float = 1e-7,
        solver_max_iters: int = 200_000,
        strict: bool = False,
    ):
        self.lambda_frac = lambda_frac
        self.lam = lam
        self.tol_sigma = tol_sigma
        self.max_iter = max_iter
        self.eps_support = eps_support
        self.compute_lambda_min = compute_lambda_min
        self.penalty_scale = penalty_scale
        self.solver_tol = solver_tol
        self.solver_max_iters = solver_max_iters
        self.strict = strict

    def _config(self) -> CBLassoConfig:
        return CBLassoConfig(
            lam=self.lam,
            lambda_frac=None if self.lam is not None else self.lambda_frac,
            tol_sigma=self.tol_sigma,
            max_iter=self.max_iter,
            eps_support=self.eps_support,
            compute_lambda_min=self.compute_lambda_min,
            penalty_scale=self.penalty_scale,
            strict=self.strict,
            solver=SolverConfig(tol=self.solver_tol, max_iters=self.solver_max_iters),
        )

    def fit(self, y: ArrayLike, _unused=None) -> CBLasso:
        y = check_observations(y)
        op = FourierOperator.from_size(y.size)
        res: CBLassoResult = solve_pipeline(op, y, self._config())
        self.operator_ = op
        self.result_ = res
        self.measure_ = res.mu_hat
        self.sigma_ = res.sigma_hat
        self.lambda_ = res.lambda_used
        self.regime_ = res.regime.value
        self.positions_ = res.mu_hat.positions
        self.amplitudes_ = res.mu_hat.amplitudes
        self.dual_coef_ = res.c_hat
        return self

    @property
    def dual_polynomial_(self) -> TrigPoly:
        _check_fitted(self, "result_")
        return TrigPoly(self.dual_coef_)

    def predict(self, _unused=None) -> NDArray[np.complex128]:
        """Fitted coefficients ``F_n(mu_hat)``."""
        _check_fitted(self, "result_")
        return fourier_coefficients(self.operator_, self.measure_)

    def fit_predict(self, y: ArrayLike) -> NDArray[np.complex128]:
        return self.fit(y).predict()


class BLasso(BaseEstimator):
    """Beurling Lasso amplitudes on a given support with the noise level held fixed.

    Args:
        sigma: Fixed noise level.
        lambda_eff: Effective penalty; ``None`` means ``||F^* y||_inf / 2``.

    Attributes:
        measure_: Estimated :class:`AtomicMeasure`.
        sigma_heuristic_: ``||y - F_n(mu_hat)|| / sqrt(n - s)``.
    """

    def __init__(self, sigma: float = 1.0, lambda_eff: float | None = None):
        self.sigma = sigma
        self.lambda_eff = lambda_eff

    def fit(self, y: ArrayLike, support: ArrayLike, zeta: ArrayLike | None = None) -> BLasso:
        """Fit amplitudes on ``support``.

        ``zeta`` are the unit-modulus phases of the amplitudes; by default the
        phases of the least-squares fit are used.
        """
        y = check_observations(y)
        support = check_positions(support)
        op = FourierOperator.from_size(y.size)
        if zeta is None:
            ls = np.linalg.lstsq(op.design(support), y, rcond=None)[0]
            zeta = np.where(ls != 0, ls / np.where(ls != 0, np.abs(ls), 1), 1.0)
        res = fit_blasso(op, y, support, zeta, self.sigma, self.lambda_eff)
        self.operator_ = op
        self.result_ = res
        self.measure_ = AtomicMeasure(res.support, res.amplitudes)
        self.amplitudes_ = res.amplitudes
        self.sigma_heuristic_ = res.sigma_heuristic
        return self

    def predict(self, _unused=None) -> NDArray[np.complex128]:
        _check_fitted(self, "result_")
        return fourier_coefficients(self.operator_, self.measure_)
