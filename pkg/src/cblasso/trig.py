"""Trigonometric polynomials on the torus: evaluation, norms and root finding.

A :class:`TrigPoly` of degree ``d`` stores ``2d + 1`` complex coefficients for
frequencies ``k = -d, ..., d`` in ascending order. The maximum of ``|p|`` and
the set where ``|p| = 1`` are located by seeding Newton's method on
``(|p|^2)'`` from a dense FFT grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

DEFAULT_EPS_SUPPORT = 1e-4
NEWTON_MAXITER = 50
NEWTON_TOL = 1e-13
# evaluation by explicit exponentials is chunked to bound memory
_EVAL_CHUNK = 1 << 16


class ConstantModulusError(ValueError):
    """Raised when ``|p|`` is constant on the torus, so its peaks are not isolated."""


@dataclass(frozen=True)
class TrigPoly:
    """Trigonometric polynomial ``t -> sum_{|k| <= d} c_k exp(2i pi k t)``."""

    coef: NDArray[np.complex128]

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coef, dtype=complex))
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError(f"coefficient array must be 1-d with odd length, got shape {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    @property
    def degree(self) -> int:
        return (self.coef.size - 1) // 2

    @property
    def frequencies(self) -> NDArray[np.int64]:
        return np.arange(-self.degree, self.degree + 1)

    def __call__(self, t: ArrayLike) -> NDArray[np.complex128] | complex:
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty(flat.size, dtype=complex)
        k = self.frequencies
        step = max(1, _EVAL_CHUNK // k.size)
        for s in range(0, flat.size, step):
            out[s : s + step] = np.exp(2j * np.pi * np.outer(flat[s : s + step], k)) @ self.coef
        return complex(out[0]) if t.ndim == 0 else out.reshape(t.shape)

    def derivative(self, order: int = 1) -> TrigPoly:
        return TrigPoly(self.coef * (2j * np.pi * self.frequencies) ** order)

    def conj(self) -> TrigPoly:
        """The polynomial ``t -> conj(p(t))``."""
        return TrigPoly(np.conj(self.coef[::-1]))

    def __add__(self, other: TrigPoly) -> TrigPoly:
        d = max(self.degree, other.degree)
        return TrigPoly(_pad(self.coef, d) + _pad(other.coef, d))

    def __mul__(self, scalar: complex) -> TrigPoly:
        return TrigPoly(scalar * self.coef)

    __rmul__ = __mul__


def _pad(c: NDArray, d: int) -> NDArray:
    extra = d - (c.size - 1) // 2
    return np.pad(c, (extra, extra)) if extra > 0 else c


def eval_grid(p: TrigPoly, m: int) -> NDArray[np.complex128]:
    """Values ``p(j / m)`` for ``j = 0, ..., m - 1`` by one inverse FFT.

    Args:
        p: Polynomial to evaluate.
        m: Grid size, at least ``2 d + 1`` so that frequencies do not alias.
    """
    d = p.degree
    if m < 2 * d + 1:
        raise ValueError(f"grid size {m} too small for degree {d}; need at least {2 * d + 1}")
    buf = np.zeros(m, dtype=complex)
    buf[p.frequencies % m] = p.coef
    return m * np.fft.ifft(buf)


def modulus_squared(p: TrigPoly) -> TrigPoly:
    """``|p|^2`` as a degree ``2d`` polynomial with Hermitian-symmetric coefficients.

    Coefficient ``j`` is the autocorrelation ``sum_k c_k conj(c_{k-j})``.
    """
    c = p.coef
    r = np.convolve(c, np.conj(c[::-1]))
    # enforce exact symmetry so that evaluation is real up to rounding
    r = 0.5 * (r + np.conj(r[::-1]))
    return TrigPoly(r)


def _default_grid(d: int, factor: int = 16) -> int:
    return max(4096, factor * (2 * d + 1))


def _newton_on_derivative(h: TrigPoly, seeds: NDArray[np.float64], spacing: float):
    """Newton iterations on ``h'`` from each seed, with steps clipped to one grid cell.

    Returns refined points, final ``h`` values and a convergence mask.
    """
    k = h.frequencies
    w = 2j * np.pi * k
    c1 = h.coef * w
    c2 = h.coef * w**2
    t = seeds.astype(float).copy()
    active = np.ones(t.size, dtype=bool)
    converged = np.zeros(t.size, dtype=bool)
    for _ in range(NEWTON_MAXITER):
        if not active.any():
            break
        ta = t[active]
        e = np.exp(2j * np.pi * np.outer(ta, k))
        g = (e @ c1).real
        gp = (e @ c2).real
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(gp < 0, -g / gp, np.sign(g) * spacing)
        step = np.clip(np.nan_to_num(step), -spacing, spacing)
        t[active] = ta + step
        done = np.abs(step) < NEWTON_TOL
        idx = np.flatnonzero(active)
        converged[idx[done]] = True
        active[idx[done]] = False
    t = np.mod(t, 1.0)
    vals = h(t).real
    return t, vals, converged


def _local_maxima(v: NDArray[np.float64]) -> NDArray[np.int64]:
    """Indices of circular local maxima (ties broken towards the first index)."""
    left = np.roll(v, 1)
    right = np.roll(v, -1)
    return np.flatnonzero((v > left) & (v >= right))


def sup_modulus(p: TrigPoly, grid: int | None = None, n_seeds: int = 8) -> tuple[float, float]:
    """Global maximum of ``|p|`` over the torus and a point achieving it.

    Args:
        p: Polynomial.
        grid: Seeding grid size; defaults to ``max(4096, 16 (2d + 1))``.
        n_seeds: Number of highest grid peaks refined by Newton.

    Returns:
        ``(value, argmax)`` with ``argmax`` in ``[0, 1)``.
    """
    h = modulus_squared(p)
    m = grid or _default_grid(p.degree)
    hv = eval_grid(h, m).real
    peaks = _local_maxima(hv)
    if peaks.size == 0:  # constant modulus
        return float(np.sqrt(max(hv[0], 0.0))), 0.0
    peaks = peaks[np.argsort(hv[peaks])[::-1][:n_seeds]]
    t, vals, _ = _newton_on_derivative(h, peaks / m, 1.0 / m)
    # Newton may wander off a peak if the seed is poor; fall back to the grid
    best_grid = int(np.argmax(hv))
    j = int(np.argmax(vals))
    if vals[j] < hv[best_grid]:
        return float(np.sqrt(max(hv[best_grid], 0.0))), best_grid / m
    return float(np.sqrt(max(vals[j], 0.0))), float(t[j])


@dataclass(frozen=True)
class RootSet:
    """Points where ``|p|`` reaches one, with residuals ``1 - |p(t)|^2``.

    ``dropped_seeds`` lists grid seeds whose Newton refinement did not converge.
    """

    points: NDArray[np.float64]
    residuals: NDArray[np.float64]
    dropped_seeds: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return int(self.points.size)

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "residuals": self.residuals.tolist()}


def unit_modulus_roots(
    p: TrigPoly, eps_support: float = DEFAULT_EPS_SUPPORT, grid: int | None = None
) -> RootSet:
    """Locate the points where ``|p|^2`` reaches one up to ``eps_support``.

    Every circular local maximum of ``|p|^2`` on the seeding grid is refined
    by Newton's method on ``(|p|^2)'``; refined points are clustered within
    ``1 / (16 grid)`` and kept when ``1 - |p|^2 <= eps_support``.

    Args:
        p: Polynomial, expected to satisfy ``|p| <= 1`` up to tolerance.
        eps_support: Acceptance threshold on ``1 - |p|^2``.
        grid: Seeding grid size; defaults to ``max(4096, 16 (2d + 1))``.

    Raises:
        ConstantModulusError: if ``|p|^2`` varies by less than ``eps_support``.
    """
    h = modulus_squared(p)
    m = grid or _default_grid(p.degree)
    hv = eval_grid(h, m).real
    if hv.max() - hv.min() < eps_support:
        raise ConstantModulusError(
            f"|p|^2 is constant up to {hv.max() - hv.min():.2e}; peaks are not isolated"
        )
    peaks = _local_maxima(hv)
    # the grid value of a true peak is within O((pi d / m)^2) of it
    peaks = peaks[hv[peaks] >= 1.0 - eps_support - 0.05]
    empty = np.zeros(0)
    if peaks.size == 0:
        return RootSet(empty, empty)
    t, vals, ok = _newton_on_derivative(h, peaks / m, 1.0 / m)
    dropped = peaks[~ok] / m
    if dropped.size:
        logger.debug("Newton did not converge from %d seed(s)", dropped.size)
    t, res = t[ok], 1.0 - vals[ok]
    keep = res <= eps_support
    t, res = t[keep], res[keep]
    order = np.argsort(t)
    t, res = t[order], res[order]
    radius = 1.0 / (16 * m)
    pts: list[float] = []
    rs: list[float] = []
    for tj, rj in zip(t, res):
        if pts and min(abs(tj - pts[-1]), 1 - abs(tj - pts[-1])) <= radius:
            if rj < rs[-1]:
                pts[-1], rs[-1] = tj, rj
            continue
        pts.append(tj)
        rs.append(rj)
    if len(pts) > 1 and 1 - (pts[-1] - pts[0]) <= radius:
        if rs[-1] < rs[0]:
            pts[0], rs[0] = pts[-1], rs[-1]
        pts.pop()
        rs.pop()
    return RootSet(np.array(pts), np.array(rs), dropped)


def l1_norm(p: TrigPoly, grid: int | None = None) -> float:
    """``int_0^1 |p(t)| dt`` by the periodic rectangle rule on ``max(4096, 32(2d+1))`` points."""
    m = grid or _default_grid(p.degree, 32)
    return float(np.abs(eval_grid(p, m)).mean())


def sup_norm(p: TrigPoly) -> float:
    return sup_modulus(p)[0]


def batch_sup_modulus(
    coefs: ArrayLike, grid: int | None = None, n_iter: int = 6, chunk: int = 1024
) -> NDArray[np.float64]:
    """``sup_t |p_b(t)|`` for each row of a coefficient matrix.

    Intended for Monte Carlo loops: the largest grid value of each row is
    refined by a fixed number of vectorized Newton steps on ``|p|^2``.

    Args:
        coefs: Array of shape ``(B, 2d + 1)``.
        grid: FFT grid size; defaults to ``max(1024, 8 (2d + 1))`` rounded up to a power of two.
        n_iter: Newton steps per row.
        chunk: Rows processed per FFT batch.
    """
    C = np.atleast_2d(np.asarray(coefs, dtype=complex))
    B, n = C.shape
    if n % 2 != 1:
        raise ValueError("rows must have odd length")
    d = (n - 1) // 2
    m = grid or int(2 ** np.ceil(np.log2(max(1024, 8 * n))))
    k = np.arange(-d, d + 1)
    w = 2j * np.pi * k
    out = np.empty(B)
    for s in range(0, B, chunk):
        Cb = C[s : s + chunk]
        buf = np.zeros((Cb.shape[0], m), dtype=complex)
        buf[:, k % m] = Cb
        vals = np.abs(m * np.fft.ifft(buf, axis=1)) ** 2
        j = np.argmax(vals, axis=1)
        best = vals[np.arange(Cb.shape[0]), j]
        t = j / m
        for _ in range(n_iter):
            e = np.exp(np.outer(t, w))
            p0 = np.einsum("bk,bk->b", e, Cb)
            p1 = np.einsum("bk,bk->b", e, Cb * w)
            p2 = np.einsum("bk,bk->b", e, Cb * w**2)
            g = 2 * (np.conj(p0) * p1).real
            gp = 2 * (np.abs(p1) ** 2 + (np.conj(p0) * p2).real)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(gp < 0, -g / gp, 0.0)
            t = t + np.clip(np.nan_to_num(step), -1.0 / m, 1.0 / m)
        e = np.exp(np.outer(t, w))
        refined = np.abs(np.einsum("bk,bk->b", e, Cb)) ** 2
        out[s : s + chunk] = np.sqrt(np.maximum(refined, best))
    return out
