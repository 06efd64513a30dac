"""Operator-splitting solver for the bordered Toeplitz-trace semidefinite program.

The problem solved is::

    maximize    Re <b, c>
    subject to  [[Lam, c], [c^*, 1]] >= 0,
                sum_i Lam[i, i + j] = delta_{j0}   for j = 0, ..., n - 1,
                ||c||_2 <= r,

whose feasible ``c`` are exactly the vectors with ``sup_t |sum_k c_k e^{2i pi k t}| <= 1``
(and ``||c|| <= r``). It is solved by Douglas-Rachford splitting between the
PSD cone and the affine-plus-ball set, with optional Anderson acceleration.
The variable is rescaled so that ``Lam`` and the corner entry have comparable
magnitude, which markedly improves convergence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    INFEASIBLE = "infeasible-detected"


class SolverNaNError(FloatingPointError):
    """Raised when the iterates stop being finite."""


@dataclass(frozen=True)
class ConicProblem:
    """Data of the program: objective vector ``b`` and ball radius ``r`` (may be ``inf``)."""

    b: NDArray[np.complex128]
    r: float = np.inf

    def __post_init__(self):
        b = np.asarray(self.b, dtype=complex).ravel()
        if b.size < 1:
            raise ValueError("objective vector must be nonempty")
        if not np.all(np.isfinite(b)):
            raise ValueError("objective vector has non-finite entries")
        r = float(self.r)
        if np.isnan(r) or r < 0:
            raise ValueError(f"ball radius must be nonnegative, got {self.r!r}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return int(self.b.size)

    @property
    def block_dim(self) -> int:
        return self.n + 1


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration controls of :func:`solve_conic`.

    Args:
        tol: Stopping tolerance on the fixed-point residual, relative to ``1 + ||b||``
            after ``b`` is normalized to unit length.
        max_iters: Iteration cap.
        rho: Splitting step, in units where ``||b|| = 1``.
        anderson: Anderson acceleration memory; 0 disables it.
        tol_psd: Reported PSD feasibility tolerance.
        tol_aff: Reported affine and ball feasibility tolerance.
    """

    tol: float = 1e-7
    max_iters: int = 200_000
    rho: float = 0.01
    anderson: int = 8
    tol_psd: float = 1e-6
    tol_aff: float = 1e-6

    def __post_init__(self):
        if not (self.tol > 0 and self.rho > 0):
            raise ValueError("tol and rho must be positive")
        if self.max_iters < 1 or self.anderson < 0:
            raise ValueError("max_iters must be >= 1 and anderson >= 0")


@dataclass(frozen=True)
class ConicSolution:
    c: NDArray[np.complex128]
    gram: NDArray[np.complex128]
    primal_residual: float
    dual_residual: float
    iterations: int
    status: SolverStatus

    @property
    def converged(self) -> bool:
        return self.status is SolverStatus.CONVERGED

    def bordered(self) -> NDArray[np.complex128]:
        n = self.c.size
        M = np.empty((n + 1, n + 1), dtype=complex)
        M[:n, :n] = self.gram
        M[:n, n] = self.c
        M[n, :n] = self.c.conj()
        M[n, n] = 1.0
        return M

    def diagnostics(self) -> dict:
        n = self.c.size
        M = self.bordered()
        sums = _diagonal_sums(self.gram)[n - 1 :]
        target = np.zeros(n)
        target[0] = 1.0
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "min_eig": float(np.linalg.eigvalsh(M).min()),
            "trace_violation": float(np.abs(sums - target).max()),
            "c_norm": float(np.linalg.norm(self.c)),
        }


def psd_project(M: ArrayLike) -> NDArray[np.complex128]:
    """Frobenius-nearest positive semidefinite matrix to a Hermitian ``M``."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    H = 0.5 * (M + M.conj().T)
    w, Q = np.linalg.eigh(H)
    pos = w > 0
    Q = Q[:, pos]
    return (Q * w[pos]) @ Q.conj().T


def _diagonal_sums(L: NDArray) -> NDArray:
    """Sums ``sum_i L[i, i + j]`` for ``j = -(n-1), ..., n-1``."""
    n = L.shape[0]
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) + (n - 1)
    return np.bincount(idx.ravel(), L.real.ravel(), 2 * n - 1) + 1j * np.bincount(
        idx.ravel(), L.imag.ravel(), 2 * n - 1
    )


class _Splitting:
    """Douglas-Rachford operator for the rescaled problem.

    The bordered variable is ``Z' = D Z D`` with ``D = diag(sqrt(n) I, 1)``, so
    the trace target becomes ``n`` and the radius becomes ``sqrt(n) r``.
    """

    def __init__(self, b_unit: NDArray, r: float, rho: float):
        n = b_unit.size
        self.n = n
        self.s = np.sqrt(n)
        self.shift = b_unit / self.s / (2 * rho)
        self.radius = r * self.s
        self.idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) + (n - 1)
        self.cntinv = 1.0 / (n - np.abs(np.arange(-(n - 1), n)))
        self.target = np.zeros(2 * n - 1)
        self.target[n - 1] = float(n)

    def prox(self, V: NDArray) -> NDArray:
        n = self.n
        L = 0.5 * (V[:n, :n] + V[:n, :n].conj().T)
        S = np.bincount(self.idx.ravel(), L.real.ravel(), 2 * n - 1) + 1j * np.bincount(
            self.idx.ravel(), L.imag.ravel(), 2 * n - 1
        )
        L = L - ((S - self.target) * self.cntinv)[self.idx]
        c = 0.5 * (V[:n, n] + V[n, :n].conj()) + self.shift
        nc = np.linalg.norm(c)
        if nc > self.radius:
            c = c * (self.radius / nc) if nc > 0 else c
        X = np.empty_like(V)
        X[:n, :n] = L
        X[:n, n] = c
        X[n, :n] = c.conj()
        X[n, n] = 1.0
        return X

    def step(self, v: NDArray):
        x = self.prox(v)
        z = psd_project(2 * x - v)
        return v + z - x, x, z

    def unscale(self, X: NDArray):
        n = self.n
        return X[:n, n] / self.s, X[:n, :n] / n


def _trivial_solution(n: int) -> ConicSolution:
    return ConicSolution(
        c=np.zeros(n, dtype=complex),
        gram=np.eye(n, dtype=complex) / n,
        primal_residual=0.0,
        dual_residual=0.0,
        iterations=0,
        status=SolverStatus.CONVERGED,
    )


def solve_conic(prob: ConicProblem, cfg: SolverConfig | None = None) -> ConicSolution:
    """Maximize ``Re <b, c>`` over the bordered PSD-trace set intersected with a ball.

    Args:
        prob: Objective vector and radius.
        cfg: Solver controls; defaults to :class:`SolverConfig`.

    Returns:
        A :class:`ConicSolution` whose ``c`` and ``gram`` satisfy the trace and
        ball constraints exactly and the PSD constraint up to the final residual.

    Raises:
        SolverNaNError: if the iterates become non-finite.
    """
    cfg = cfg or SolverConfig()
    n = prob.n
    nb = float(np.linalg.norm(prob.b))
    if nb == 0.0 or prob.r == 0.0:
        return _trivial_solution(n)

    op = _Splitting(prob.b / nb, prob.r, cfg.rho)
    v = np.zeros((n + 1, n + 1), dtype=complex)
    v[:n, :n] = np.eye(n)
    v[n, n] = 1.0
    tol = cfg.tol * 2.0

    hist_v: list[NDArray] = []
    hist_g: list[NDArray] = []
    Tv, x, z = op.step(v)
    status = SolverStatus.MAX_ITERS
    it = 0
    z_prev = z
    for it in range(1, cfg.max_iters + 1):
        g = Tv - v
        gn = float(np.linalg.norm(g))
        if not np.isfinite(gn):
            raise SolverNaNError(f"non-finite iterate at iteration {it}")
        if gn < tol:
            status = SolverStatus.CONVERGED
            break
        v_next = Tv
        if cfg.anderson:
            hist_v.append(v.ravel().copy())
            hist_g.append(g.ravel().copy())
            if len(hist_v) > cfg.anderson + 1:
                hist_v.pop(0)
                hist_g.pop(0)
            if len(hist_v) >= 2:
                dG = np.diff(np.array(hist_g), axis=0).T
                dV = np.diff(np.array(hist_v), axis=0).T
                A = np.concatenate([dG.real, dG.imag])
                rhs = np.concatenate([g.real.ravel(), g.imag.ravel()])
                gram = A.T @ A
                gram += 1e-10 * np.trace(gram) / gram.shape[0] * np.eye(gram.shape[0])
                gamma = np.linalg.solve(gram, A.T @ rhs)
                cand = (v.ravel() + g.ravel() - (dV + dG) @ gamma).reshape(v.shape)
                Tc, xc, zc = op.step(cand)
                # accept the extrapolation only if it reduces the residual
                if np.all(np.isfinite(Tc)) and np.linalg.norm(Tc - cand) < gn:
                    z_prev = z
                    v, Tv, x, z = cand, Tc, xc, zc
                    continue
                hist_v.clear()
                hist_g.clear()
        z_prev = z
        v = v_next
        Tv, x, z = op.step(v)

    c, gram = op.unscale(x)
    primal = float(np.linalg.norm(x - z))
    dual = float(cfg.rho * np.linalg.norm(z - z_prev))
    if status is not SolverStatus.CONVERGED:
        logger.warning("conic solver stopped after %d iterations (residual %.2e)", it, gn)
    return ConicSolution(
        c=c,
        gram=0.5 * (gram + gram.conj().T),
        primal_residual=primal,
        dual_residual=dual,
        iterations=it,
        status=status,
    )
