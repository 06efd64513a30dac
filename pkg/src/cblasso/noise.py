"""Tail bounds for the noise processes and their Monte Carlo validation.

The noise is ``eps = eps1 + i eps2`` with ``eps1, eps2`` i.i.d. ``N(0, sigma0^2 I_n)``.
Two processes matter: ``F_n^*(eps)`` itself and the self-normalized
``F_n^*(eps) / (sqrt(n) ||eps||)``, whose real part is written ``Xn`` below.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special, stats

from ._parallel import map_chunks, spawn_generators
from .measures import FourierOperator
from .trig import batch_sup_modulus

PATH_GRID = 8192


def tau(n: int) -> float:
    """``2 pi sqrt(fc (fc + 1) / 3)``: the standard deviation ratio of ``Xn'`` to ``Xn``."""
    fc = (n - 1) // 2
    return 2 * np.pi * np.sqrt(fc * (fc + 1) / 3.0)


def derivative_variance(n: int) -> float:
    """Variance of ``X'(t)`` for the unnormalized real process: ``(4 pi^2 / 3) fc (fc + 1) n``."""
    fc = (n - 1) // 2
    return 4 * np.pi**2 / 3 * fc * (fc + 1) * n


def gaussian_sup_bound(u: ArrayLike, n: int, sigma0: float) -> NDArray[np.float64] | float:
    """Bound ``n exp(-u^2 / (4 n sigma0^2))`` on ``P(||F^* eps||_inf > u)``."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("u must be positive")
    out = n * np.exp(-(u**2) / (4 * n * sigma0**2))
    return float(out) if out.ndim == 0 else out


def normalized_sup_bound(u: ArrayLike, n: int, variant: str = "simple") -> NDArray[np.float64] | float:
    """Bound on ``P(||F^* eps||_inf / (sqrt(n) ||eps||) > u)``.

    Args:
        u: Level; ``0 < u <= 1`` for ``"simple"`` and ``0 < u < sqrt(2)`` for ``"sharp"``
            (``u = sqrt(2)`` gives 0 in the sharp form).
        n: Number of coefficients.
        variant: ``"simple"`` for ``(2 sqrt 2 + 2n / sqrt 3)(1 - u^2/2)^n`` or
            ``"sharp"`` for ``(2 sqrt 2 / sqrt(2 - u^2) + 2 tau / (pi (2 - u^2)))(1 - u^2/2)^n``.
    """
    u = np.asarray(u, dtype=float)
    base = 1.0 - u**2 / 2
    if variant == "simple":
        if np.any((u <= 0) | (u > 1)):
            raise ValueError("simple variant requires 0 < u <= 1")
        out = (2 * np.sqrt(2) + 2 * n / np.sqrt(3)) * base**n
    elif variant == "sharp":
        if np.any((u <= 0) | (u > np.sqrt(2))):
            raise ValueError("sharp variant requires 0 < u <= sqrt(2)")
        with np.errstate(divide="ignore", invalid="ignore"):
            pre = 2 * np.sqrt(2) / np.sqrt(2 - u**2) + 2 * tau(n) / (np.pi * (2 - u**2))
            out = np.where(base > 0, pre * base**n, 0.0)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(out) if out.ndim == 0 else out


def joint_density(a: ArrayLike, b: ArrayLike, n: int) -> NDArray[np.float64] | float:
    """Density of ``(Xn(t), Xn'(t))``: ``(n-1)/(tau pi) [1 - a^2 - (b/tau)^2]^{n-2}`` inside the ellipse."""
    if n < 2:
        raise ValueError("n must be >= 2")
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    tn = tau(n)
    rem = 1.0 - a**2 - (b / tn) ** 2
    out = np.where(rem > 0, (n - 1) / (tn * np.pi) * np.maximum(rem, 0.0) ** (n - 2), 0.0)
    return float(out) if out.ndim == 0 else out


def marginal_density(a: ArrayLike, n: int) -> NDArray[np.float64] | float:
    """Density of ``Xn(t)``: ``Gamma(n) / (sqrt(pi) Gamma(n - 1/2)) (1 - a^2)^{n - 3/2}`` on ``[-1, 1]``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    a = np.asarray(a, dtype=float)
    const = math.exp(math.lgamma(n) - math.lgamma(n - 0.5)) / math.sqrt(math.pi)
    rem = 1.0 - a**2
    out = np.where(rem > 0, const * np.maximum(rem, 0.0) ** (n - 1.5), 0.0)
    return float(out) if out.ndim == 0 else out


def process_densities(a: ArrayLike, b: ArrayLike, n: int):
    """``(joint_density(a, b, n), marginal_density(a, n))``."""
    return joint_density(a, b, n), marginal_density(a, n)


def marginal_cdf(a: ArrayLike, n: int) -> NDArray[np.float64]:
    """CDF of ``Xn(t)``; ``(1 + Xn) / 2`` is Beta(n - 1/2, n - 1/2)."""
    a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
    return special.betainc(n - 0.5, n - 0.5, (1 + a) / 2)


def radial_cdf(r2: ArrayLike, n: int) -> NDArray[np.float64]:
    """CDF of ``Xn^2 + (Xn' / tau)^2``, which is ``1 - (1 - r2)^{n-1}`` on ``[0, 1]``."""
    r2 = np.clip(np.asarray(r2, dtype=float), 0.0, 1.0)
    return 1.0 - (1.0 - r2) ** (n - 1)


def crossing_bounds(u: ArrayLike, n: int):
    """Bounds for the level ``u / sqrt(2)`` of ``Xn``.

    Returns:
        ``(upcrossing, stay_above)``: ``(tau / 2 pi)(1 - u^2/2)^{n-1}`` on the expected
        number of up-crossings and ``2 (1 - u^2/2)^{n - 1/2}`` on the probability of
        staying above the level on the whole torus.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= np.sqrt(2))):
        raise ValueError("u must lie in (0, sqrt(2))")
    base = 1.0 - u**2 / 2
    up = tau(n) / (2 * np.pi) * base ** (n - 1)
    above = 2 * base ** (n - 0.5)
    if up.ndim == 0:
        return float(up), float(above)
    return up, above


def chi2_bounds(n: int, sigma0: float, x: float) -> tuple[float, float]:
    """Thresholds ``2 n sigma0^2 (1 - sqrt(2x/n))`` and ``2 n sigma0^2 (1 + x/n + sqrt(2x/n))``.

    ``||eps||^2`` falls below the first, or above the second, with probability at most ``exp(-x)``.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    m = 2 * n * sigma0**2
    r = np.sqrt(2 * x / n)
    return float(m * (1 - r)), float(m * (1 + x / n + r))


def sigma_bias_factor(n: int) -> float:
    """``E ||eps|| / (sqrt(2 n) sigma0) = Gamma(n + 1/2) / (sqrt(n) Gamma(n))``, via log-gamma."""
    return math.exp(math.lgamma(n + 0.5) - math.lgamma(n)) / math.sqrt(n)


@dataclass(frozen=True)
class Prop4Check:
    """Noise-level guarantee: conditions on ``lam`` and the resulting probability bound.

    ``lambda_ok`` is ``lam >= R / (1 - eta)``; ``snr_ok`` is
    ``lam ||mu0|| / sigma_low <= 2 (sqrt(1 + eta^2 / 4) - 1)``. When both hold,
    ``|sqrt(n) sigma_hat / ||eps|| - 1| <= eta`` fails with probability at most
    ``failure_bound``.
    """

    lam: float
    eta: float
    alpha: float
    n: int
    tv_norm: float
    sigma0: float
    R: float
    sigma_low: float
    lambda_ok: bool
    snr_ok: bool
    failure_bound: float

    @property
    def passes(self) -> bool:
        return self.lambda_ok and self.snr_ok

    def to_json(self) -> dict:
        return asdict(self)


def prop4_check(
    lam: float, eta: float, alpha: float, n: int, tv_norm: float, sigma0: float
) -> Prop4Check:
    if not (0 < eta < 1 and 0 < alpha < 1):
        raise ValueError("eta and alpha must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    q = -2 * math.log(alpha) / n
    if q >= 1:
        raise ValueError(f"n = {n} is too small for alpha = {alpha}: lower noise level undefined")
    R = math.sqrt(2 * math.log(n / alpha) / n)
    sigma_low = math.sqrt(2) * sigma0 * math.sqrt(1 - math.sqrt(q))
    snr_limit = 2 * (math.sqrt(1 + (eta / 2) ** 2) - 1)
    return Prop4Check(
        lam=lam,
        eta=eta,
        alpha=alpha,
        n=n,
        tv_norm=tv_norm,
        sigma0=sigma0,
        R=R,
        sigma_low=sigma_low,
        lambda_ok=bool(lam >= R / (1 - eta)),
        snr_ok=bool(lam * tv_norm / sigma_low <= snr_limit),
        failure_bound=alpha * (2 * math.sqrt(2) / n + (2 * math.sqrt(3) + 3) / 3),
    )


def minimal_lambda(n: int, alpha: float, eta: float) -> float:
    """Smallest ``lam`` with ``lam >= R / (1 - eta)``."""
    return math.sqrt(2 * math.log(n / alpha) / n) / (1 - eta)


def sample_noise(
    op: FourierOperator | int, sigma0: float, rng: np.random.Generator, size: int | None = None
) -> NDArray[np.complex128]:
    """Complex noise with i.i.d. ``N(0, sigma0^2)`` real and imaginary parts.

    Returns a vector of length ``n``, or an array of shape ``(size, n)``.
    """
    if sigma0 < 0:
        raise ValueError("sigma0 must be nonnegative")
    n = op.n if isinstance(op, FourierOperator) else int(op)
    shape = (n,) if size is None else (size, n)
    z = rng.standard_normal((2, *shape))
    return sigma0 * (z[0] + 1j * z[1])


def _paths(eps: NDArray, grid: int) -> NDArray[np.complex128]:
    """``F^* eps`` on ``grid`` equispaced points for each row of ``eps``."""
    n = eps.shape[1]
    d = (n - 1) // 2
    buf = np.zeros((eps.shape[0], grid), dtype=complex)
    buf[:, np.arange(-d, d + 1) % grid] = eps
    return grid * np.fft.ifft(buf, axis=1)


@dataclass
class NoiseSamples:
    """Per-draw statistics used by the Monte Carlo validators."""

    sup_abs: NDArray[np.float64]
    sq_norm: NDArray[np.float64]
    ratio: NDArray[np.float64]
    x0: NDArray[np.float64]
    dx0: NDArray[np.float64]
    upcrossings: dict = field(default_factory=dict)
    min_path: NDArray[np.float64] | None = None


def _draw_chunk(args) -> NoiseSamples:
    n, sigma0, size, rng, levels, path_grid = args
    eps = sample_noise(n, sigma0, rng, size)
    sup = batch_sup_modulus(eps)
    sq = np.einsum("ij,ij->i", eps.real, eps.real) + np.einsum("ij,ij->i", eps.imag, eps.imag)
    norm = np.sqrt(n) * np.sqrt(sq)
    d = (n - 1) // 2
    k = np.arange(-d, d + 1)
    x0 = eps.sum(axis=1).real / norm
    dx0 = (eps * (2j * np.pi * k)).sum(axis=1).real / norm
    ups = {}
    min_path = None
    if levels:
        X = _paths(eps, path_grid).real / norm[:, None]
        min_path = X.min(axis=1)
        nxt = np.roll(X, -1, axis=1)
        for v in levels:
            ups[v] = np.count_nonzero((X <= v) & (nxt > v), axis=1)
    return NoiseSamples(sup, sq, sup / norm, x0, dx0, ups, min_path)


def draw_noise_statistics(
    n: int,
    samples: int,
    seed: int | None = None,
    sigma0: float = 1.0,
    levels: Iterable[float] = (),
    path_grid: int = PATH_GRID,
    chunk: int = 2000,
) -> NoiseSamples:
    """Monte Carlo draws of the sup statistics, the process at ``t = 0`` and path crossings.

    Chunks use independent Philox substreams spawned from ``seed``, so the
    result does not depend on how many worker threads run them.
    """
    levels = tuple(levels)
    sizes = [min(chunk, samples - s) for s in range(0, samples, chunk)]
    rngs = spawn_generators(seed, len(sizes))
    parts = map_chunks(
        _draw_chunk, [(n, sigma0, sz, g, levels, path_grid) for sz, g in zip(sizes, rngs)]
    )
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
    ups = {v: np.concatenate([p.upcrossings[v] for p in parts]) for v in levels}
    mins = np.concatenate([p.min_path for p in parts]) if levels else None
    return NoiseSamples(cat("sup_abs"), cat("sq_norm"), cat("ratio"), cat("x0"), cat("dx0"), ups, mins)


def tail_estimate(indicator: ArrayLike) -> tuple[float, float]:
    """Frequency of an event and its binomial standard error."""
    x = np.asarray(indicator, dtype=float)
    p = float(x.mean())
    return p, float(np.sqrt(max(p * (1 - p), 0.0) / x.size))


def mean_estimate(values: ArrayLike) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def chi2_gof(
    samples: ArrayLike, cdf, edges: ArrayLike
) -> tuple[float, float]:
    """Pearson goodness of fit of ``samples`` against ``cdf`` on bins with the given inner edges.

    Two open-ended bins are added, so ``len(edges) + 1`` bins in total.

    Returns:
        ``(statistic, p_value)``.
    """
    x = np.asarray(samples, dtype=float)
    edges = np.asarray(edges, dtype=float)
    counts = np.bincount(np.searchsorted(edges, x, side="right"), minlength=edges.size + 1)
    probs = np.diff(np.concatenate([[0.0], cdf(edges), [1.0]]))
    res = stats.chisquare(counts, probs * x.size)
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class TailRow:
    quantity: str
    u: float
    bound: float
    mc_estimate: float
    stderr: float
    samples: int

    @property
    def dominated(self) -> bool:
        return self.mc_estimate <= self.bound + 3 * self.stderr


@dataclass
class TailReport:
    n: int
    samples: int
    rows: list[TailRow]
    max_ratio: float

    @property
    def violations(self) -> int:
        return sum(not r.dominated for r in self.rows) + int(self.max_ratio > np.sqrt(2) + 1e-9)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "u", "bound", "mc_estimate", "stderr", "samples", "dominated"])
            for r in self.rows:
                w.writerow([r.quantity, repr(r.u), repr(r.bound), repr(r.mc_estimate), repr(r.stderr), r.samples, r.dominated])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "samples": self.samples,
            "max_ratio": self.max_ratio,
            "violations": self.violations,
            "rows": [asdict(r) | {"dominated": r.dominated} for r in self.rows],
        }


def rice_check(
    n: int,
    u_values: Iterable[float],
    samples: int = 100_000,
    seed: int | None = None,
    sigma0: float = 1.0,
    alphas: Iterable[float] = (0.5, 0.1, 0.05),
    chi2_x: Iterable[float] = (1.0, 2.0, 3.0),
    paths: bool = True,
) -> TailReport:
    """Compare every closed-form tail bound with Monte Carlo frequencies.

    Args:
        n: Number of coefficients.
        u_values: Levels for the self-normalized supremum and the crossing bounds.
        samples: Monte Carlo draws.
        seed: Seed of the substream tree.
        sigma0: Noise level for the unnormalized bounds.
        alphas: Levels ``alpha`` at which ``u = 2 sigma0 sqrt(n log(n / alpha))`` is tested
            for the unnormalized supremum.
        chi2_x: Deviations ``x`` for the squared-norm thresholds.
        paths: Simulate full paths to count up-crossings (slower).
    """
    u_values = [float(u) for u in u_values]
    levels = [u / np.sqrt(2) for u in u_values] if paths else []
    ns = draw_noise_statistics(n, samples, seed, sigma0, levels)
    rows: list[TailRow] = []

    def add(q, u, bound, ind):
        p, se = tail_estimate(ind)
        rows.append(TailRow(q, float(u), float(bound), p, se, samples))

    for u in u_values:
        if u <= 1:
            add("normalized_sup_simple", u, normalized_sup_bound(u, n, "simple"), ns.ratio > u)
        add("normalized_sup_sharp", u, normalized_sup_bound(u, n, "sharp"), ns.ratio > u)
        if paths:
            up, above = crossing_bounds(u, n)
            v = u / np.sqrt(2)
            m, se = mean_estimate(ns.upcrossings[v])
            rows.append(TailRow("upcrossings", u, up, m, se, samples))
            add("stay_above", u, above, ns.min_path > v)
    for a in alphas:
        u = 2 * sigma0 * np.sqrt(n * np.log(n / a))
        add("gaussian_sup", u, gaussian_sup_bound(u, n, sigma0), ns.sup_abs > u)
    for x in chi2_x:
        lo, hi = chi2_bounds(n, sigma0, x)
        add("chi2_lower", x, np.exp(-x), ns.sq_norm <= lo)
        add("chi2_upper", x, np.exp(-x), ns.sq_norm >= hi)
    return TailReport(n, samples, rows, float(ns.ratio.max()))
