"""Interpolating trigonometric polynomials (dual certificates) and their checks.

A certificate is built as ``q(t) = sum_j alpha_j K(t - t_j) + beta_j K'(t - t_j)``
where ``K`` is a power of the Fejér kernel with degree at most ``fc`` and
``K(0) = 1``. The coefficients solve a ``2s x 2s`` system fixing the values
and derivatives of ``q`` at the nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .measures import AtomicMeasure, FourierOperator, torus_distance
from .trig import TrigPoly, eval_grid, l1_norm, sup_modulus

KINDS = ("q1", "q01", "q0")
#: near-region radius is ``C1_NEAR / fc``
C1_NEAR = 0.5
VERIFY_GRID = 16384
INTERP_TOL = 1e-8


class SeparationError(ValueError):
    """Nodes are closer than the required minimum separation."""


class SingularSystemError(np.linalg.LinAlgError):
    """The interpolation system is numerically singular."""


def fejer_power_coefficients(fc: int, power: int = 3) -> NDArray[np.float64]:
    """Coefficients (``k = -fc..fc``) of ``(F_m / m)^power`` with the largest ``m`` fitting in degree ``fc``.

    ``F_m(t) = sum_{|k| < m} (1 - |k|/m) e^{2i pi k t}`` is the Fejér kernel,
    so the result has value one at ``t = 0``.
    """
    if power < 1:
        raise ValueError("power must be >= 1")
    m = fc // power + 1
    base = 1.0 - np.abs(np.arange(-(m - 1), m)) / m
    coef = np.ones(1)
    for _ in range(power):
        coef = np.convolve(coef, base / m)
    d = (coef.size - 1) // 2
    out = np.zeros(2 * fc + 1)
    out[fc - d : fc + d + 1] = coef
    return out


@dataclass(frozen=True)
class Certificate:
    poly: TrigPoly
    kind: str
    nodes: NDArray[np.float64]
    targets: NDArray[np.complex128]
    fc: int
    report: dict = field(default_factory=dict)

    def __call__(self, t: ArrayLike):
        return self.poly(t)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "fc": self.fc,
            "nodes": self.nodes.tolist(),
            "targets": [[float(v.real), float(v.imag)] for v in self.targets],
            "coefficients": [[float(c.real), float(c.imag)] for c in self.poly.coef],
            "report": self.report,
        }


def _check_nodes(op: FourierOperator, nodes: NDArray, delta_min: float | None) -> None:
    if nodes.size < 1:
        raise ValueError("at least one node is required")
    if delta_min is None or nodes.size < 2:
        return
    d = torus_distance(nodes[:, None], nodes[None, :])
    d = d[~np.eye(nodes.size, dtype=bool)]
    if d.min() < delta_min:
        raise SeparationError(f"minimum node separation {d.min():.4g} < required {delta_min:.4g}")


def _solve_kernel_system(
    op: FourierOperator,
    nodes: NDArray,
    values: NDArray,
    slopes: NDArray,
    power: int,
    delta_min: float | None,
) -> TrigPoly:
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    _check_nodes(op, nodes, delta_min)
    kc = fejer_power_coefficients(op.fc, power).astype(complex)
    k = op.frequencies
    w = 2j * np.pi * k
    K = TrigPoly(kc)
    dK = K.derivative()
    ddK = dK.derivative()
    diff = nodes[:, None] - nodes[None, :]
    # scale derivative unknowns so both blocks are O(1)
    scale = 2 * np.pi * op.fc
    A = np.block(
        [
            [K(diff), dK(diff) / scale],
            [dK(diff), ddK(diff) / scale],
        ]
    )
    rhs = np.concatenate([values, slopes])
    if np.linalg.cond(A) > 1e12:
        raise SingularSystemError("interpolation system is singular; nodes are too close for this fc")
    sol = np.linalg.solve(A, rhs)
    s = nodes.size
    alpha, beta = sol[:s], sol[s:] / scale
    shifts = np.exp(-2j * np.pi * np.outer(k, nodes))
    coef = kc * (shifts @ alpha + w * (shifts @ beta))
    return TrigPoly(coef)


def default_delta_min(op: FourierOperator) -> float:
    return 2.0 / op.n


def build_interpolant(
    op: FourierOperator,
    nodes: ArrayLike,
    targets: ArrayLike,
    power: int = 3,
    delta_min: float | None = -1.0,
    verify: bool = True,
) -> Certificate:
    """Polynomial with ``q(t_j) = v_j`` and ``q'(t_j) = 0``.

    Args:
        op: Sampling operator fixing the degree bound ``fc``.
        nodes: Interpolation nodes.
        targets: Values ``v_j`` with ``|v_j| <= 1``.
        power: Power of the Fejér kernel.
        delta_min: Required node separation; the default ``-1`` means ``2 / n``
            and ``None`` disables the check.
        verify: Attach a :func:`verify_certificate` report.

    Raises:
        SeparationError: if nodes are closer than ``delta_min``.
        SingularSystemError: if the kernel system cannot be solved reliably.
    """
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    v = np.atleast_1d(np.asarray(targets, dtype=complex))
    if v.shape != nodes.shape:
        raise ValueError("nodes and targets must have the same length")
    if np.any(np.abs(v) > 1 + 1e-12):
        raise ValueError("targets must have modulus at most one")
    dm = default_delta_min(op) if delta_min == -1.0 else delta_min
    poly = _solve_kernel_system(op, nodes, v, np.zeros_like(v), power, dm)
    unit = np.allclose(np.abs(v), 1.0)
    onehot = np.count_nonzero(v) == 1 and np.isclose(np.abs(v).max(), 1.0)
    kind = "q1" if unit else ("q01" if onehot else "q1")
    cert = Certificate(poly, kind, nodes, v, op.fc)
    return replace(cert, report=verify_certificate(cert)) if verify else cert


def build_derivative_interpolant(
    op: FourierOperator,
    nodes: ArrayLike,
    targets: ArrayLike,
    power: int = 3,
    delta_min: float | None = -1.0,
    verify: bool = True,
) -> Certificate:
    """Polynomial with ``q(t_j) = 0`` and ``q'(t_j) = v_j``; see :func:`build_interpolant`."""
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    v = np.atleast_1d(np.asarray(targets, dtype=complex))
    if v.shape != nodes.shape:
        raise ValueError("nodes and targets must have the same length")
    dm = default_delta_min(op) if delta_min == -1.0 else delta_min
    poly = _solve_kernel_system(op, nodes, np.zeros_like(v), v, power, dm)
    cert = Certificate(poly, "q0", nodes, v, op.fc)
    return replace(cert, report=verify_certificate(cert)) if verify else cert


def verify_certificate(cert: Certificate, grid: int = VERIFY_GRID, c1: float = C1_NEAR) -> dict:
    """Measure interpolation residuals, near and far behaviour and the L1 norm on a dense grid.

    Fitted constants are reported alongside pass/fail flags:
    ``far_margin = 1 - sup_far |q|`` for value interpolants,
    ``near_curvature = min (1 - |q|) / (n^2 d^2)`` over the near region,
    and the scaled L1 norm ``||q||_1 n / s`` (``n^2 / s`` for derivative interpolants).
    """
    q = cert.poly
    n = 2 * cert.fc + 1
    s = cert.nodes.size
    dq = q.derivative()
    at_nodes, d_at_nodes = q(cert.nodes), dq(cert.nodes)
    t = np.arange(grid) / grid
    vals = np.abs(eval_grid(q, grid))
    dist = torus_distance(t[:, None], cert.nodes[None, :]).min(axis=1)
    near = dist < c1 / cert.fc
    l1 = l1_norm(q)
    sup, argsup = sup_modulus(q)
    rep: dict = {"sup_norm": sup, "argsup": argsup, "l1_norm": l1, "grid": grid, "c1": c1}
    if cert.kind == "q0":
        interp = float(max(np.abs(at_nodes).max(), np.abs(d_at_nodes - cert.targets).max()))
        far_sup = float(vals[~near].max()) if (~near).any() else 0.0
        nearest = np.argmin(torus_distance(t[:, None], cert.nodes[None, :]), axis=1)
        signed = np.mod(t - cert.nodes[nearest] + 0.5, 1.0) - 0.5
        lin = np.abs(q(t[near]) - cert.targets[nearest[near]] * signed[near])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = lin / (n * signed[near] ** 2 / 2)
        rep.update(
            interp_residual=interp,
            far_sup=far_sup,
            far_sup_scaled=far_sup * n,
            near_linear_constant=float(np.nanmax(ratio[np.isfinite(ratio)])) if near.any() else 0.0,
            l1_scaled=l1 * n**2 / s,
        )
        rep["passed"] = bool(interp <= INTERP_TOL and np.isfinite(far_sup))
        return rep
    interp = float(max(np.abs(at_nodes - cert.targets).max(), np.abs(d_at_nodes).max() / n))
    far_sup = float(vals[~near].max()) if (~near).any() else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = (1.0 - vals[near]) / (n**2 * dist[near] ** 2)
    curv = curv[np.isfinite(curv) & (dist[near] > 0)]
    rep.update(
        interp_residual=interp,
        far_sup=far_sup,
        far_margin=1.0 - far_sup,
        near_curvature=float(curv.min()) if curv.size else float("nan"),
        near_curvature_upper=float(curv.max()) if curv.size else float("nan"),
        l1_scaled=l1 * n / s,
    )
    checks = [interp <= INTERP_TOL]
    if cert.kind == "q1":
        checks += [sup <= 1 + 1e-6, rep["far_margin"] > 0, not curv.size or curv.min() > 0]
    rep["passed"] = bool(all(checks))
    return rep


def phase_certificate(op: FourierOperator, mu0: AtomicMeasure, **kwargs) -> Certificate:
    """Value interpolant of the phases ``a_j / |a_j|`` of ``mu0``."""
    a = mu0.amplitudes
    return build_interpolant(op, mu0.positions, a / np.abs(a), **kwargs)


def bregman_divergence(
    op: FourierOperator, mu_hat: AtomicMeasure, mu0: AtomicMeasure, q: Certificate
) -> float:
    """``||mu_hat|| - ||mu0|| - Re int conj(q) d(mu_hat - mu0)`` for a phase-matched ``q``.

    Raises:
        ValueError: if ``q`` does not interpolate the phases of ``mu0`` to ``1e-6``.
    """
    if q.fc != op.fc:
        raise ValueError("certificate and operator have different cutoff frequencies")
    phases = mu0.amplitudes / np.abs(mu0.amplitudes)
    if mu0.size and np.abs(q(mu0.positions) - phases).max() > 1e-6:
        raise ValueError("certificate does not interpolate the phases of mu0")

    def pairing(mu: AtomicMeasure) -> float:
        if mu.size == 0:
            return 0.0
        return float((np.conj(q(mu.positions)) * mu.amplitudes).real.sum())

    return mu_hat.tv_norm() - mu0.tv_norm() - (pairing(mu_hat) - pairing(mu0))
