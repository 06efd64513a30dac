"""Beurling Lasso baseline on a fixed support and its residual noise heuristic.

The baseline reuses the amplitude step of the concomitant estimator with the
noise level held fixed, so both estimators can be compared on the same
support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .measures import AtomicMeasure, FourierOperator, fourier_coefficients
from .solver import _design, amplitude_step
from .trig import TrigPoly, sup_modulus


@dataclass(frozen=True)
class BLassoResult:
    amplitudes: NDArray[np.complex128]
    sigma_heuristic: float
    support: NDArray[np.float64]
    residual_norm: float
    ridged: bool = False

    @property
    def measure(self) -> AtomicMeasure:
        return AtomicMeasure(self.support, self.amplitudes)

    def to_json(self) -> dict:
        return {
            "support": self.support.tolist(),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
            "sigma_heuristic": self.sigma_heuristic,
            "residual_norm": self.residual_norm,
            "ridged": self.ridged,
        }


def default_lambda_eff(op: FourierOperator, y: ArrayLike) -> float:
    """``n * lambda_max / 2`` with ``lambda_max = ||F^* y||_inf / n``, i.e. ``||F^* y||_inf / 2``."""
    return 0.5 * sup_modulus(TrigPoly(np.asarray(y, dtype=complex)))[0]


def blasso_amplitudes(
    op: FourierOperator,
    y: ArrayLike,
    support: ArrayLike,
    lambda_eff: float,
    sigma_fixed: float,
    zeta: ArrayLike,
) -> tuple[NDArray[np.complex128], bool]:
    """One amplitude step ``a = X^+ y - lambda_eff sigma_fixed (X^* X)^{-1} zeta``.

    Args:
        op: Sampling operator.
        y: Observations.
        support: Fixed support points.
        lambda_eff: Effective penalty; see :func:`default_lambda_eff`.
        sigma_fixed: Noise level held fixed.
        zeta: Unit-modulus phases on the support.

    Returns:
        Amplitudes and whether a ridge was added to ``X^* X``.
    """
    y = np.asarray(y, dtype=complex)
    support = np.atleast_1d(np.asarray(support, dtype=float))
    if support.size == 0:
        raise ValueError("support is empty")
    if support.size > op.n:
        raise ValueError(f"support size {support.size} exceeds n = {op.n}")
    d = _design(op, y, support, np.atleast_1d(np.asarray(zeta, dtype=complex)))
    return amplitude_step(d, lambda_eff * sigma_fixed), d.ridged


def blasso_sigma_heuristic(
    op: FourierOperator, y: ArrayLike, mu_hat: AtomicMeasure, s_hat: int | None = None
) -> float:
    """``||y - F_n(mu_hat)|| / sqrt(n - s_hat)``."""
    s_hat = mu_hat.size if s_hat is None else int(s_hat)
    if s_hat >= op.n:
        raise ValueError(f"support size {s_hat} must be smaller than n = {op.n}")
    r = np.asarray(y, dtype=complex) - fourier_coefficients(op, mu_hat)
    return float(np.linalg.norm(r) / np.sqrt(op.n - s_hat))


def fit_blasso(
    op: FourierOperator,
    y: ArrayLike,
    support: ArrayLike,
    zeta: ArrayLike,
    sigma_fixed: float,
    lambda_eff: float | None = None,
) -> BLassoResult:
    """Baseline amplitudes on ``support`` together with the residual noise heuristic."""
    y = np.asarray(y, dtype=complex)
    support = np.atleast_1d(np.asarray(support, dtype=float))
    lam = default_lambda_eff(op, y) if lambda_eff is None else float(lambda_eff)
    a, ridged = blasso_amplitudes(op, y, support, lam, sigma_fixed, zeta)
    mu = AtomicMeasure(support, a)
    res = float(np.linalg.norm(y - fourier_coefficients(op, mu)))
    return BLassoResult(
        amplitudes=a,
        sigma_heuristic=blasso_sigma_heuristic(op, y, mu, support.size),
        support=support,
        residual_norm=res,
        ridged=ridged,
    )
