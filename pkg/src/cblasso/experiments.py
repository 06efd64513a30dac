"""Synthetic instances, paired replica studies and the compatibility diagnostic."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._parallel import map_chunks, spawn_generators
from .blasso import fit_blasso
from .measures import AtomicMeasure, FourierOperator, fourier_coefficients, torus_distance
from .noise import sample_noise, sigma_bias_factor
from .solver import CBLassoConfig, CBLassoResult, solve_pipeline

logger = logging.getLogger(__name__)

AMPLITUDE_SCHEMES = ("pm1", "complex-unit", "custom")
MAX_PLACEMENT_ROUNDS = 100_000


class PlacementError(ValueError):
    """No admissible spike placement was found."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Replica study settings.

    Args:
        n: Number of observed coefficients (odd).
        s0: Number of spikes.
        sigma0: Standard deviation of the real and imaginary noise parts.
        amplitudes: ``"pm1"`` (random signs), ``"complex-unit"`` (random phases) or ``"custom"``.
        custom_amplitudes: Amplitudes used with ``"custom"``.
        lambda_frac: Tuning parameter as a fraction of ``lambda_max(y)``; ignored if ``lam`` is set.
        lam: Fixed tuning parameter.
        delta_min: Minimum spike separation; defaults to ``2 / n``.
        c1: Localization radius is ``c1 / fc``.
        replicas: Number of replicas.
        seed: Root seed.
        compute_lambda_min: Solve the unpenalized problem in every replica.
        solver: Overrides for the estimator settings (``lam`` and ``lambda_frac`` are replaced).
    """

    n: int = 161
    s0: int = 3
    sigma0: float = 1.0 / np.sqrt(2)
    amplitudes: str = "pm1"
    custom_amplitudes: tuple[complex, ...] | None = None
    lambda_frac: float = 0.5
    lam: float | None = None
    delta_min: float | None = None
    c1: float = 0.5
    replicas: int = 100
    seed: int | None = 0
    compute_lambda_min: bool = False
    solver: CBLassoConfig | None = None

    def __post_init__(self):
        if self.n < 3 or self.n % 2 != 1:
            raise ValueError(f"n must be odd and >= 3, got {self.n}")
        if self.s0 < 0:
            raise ValueError("s0 must be nonnegative")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be nonnegative")
        if self.amplitudes not in AMPLITUDE_SCHEMES:
            raise ValueError(f"amplitude scheme must be one of {AMPLITUDE_SCHEMES}")
        if self.amplitudes == "custom" and (
            self.custom_amplitudes is None or len(self.custom_amplitudes) != self.s0
        ):
            raise ValueError("custom amplitudes must be given, one per spike")
        if self.replicas < 0:
            raise ValueError("replicas must be nonnegative")
        if self.s0 > 1 and self.s0 * self.separation >= 1:
            raise PlacementError(
                f"{self.s0} spikes cannot be separated by {self.separation:.4g} on the torus"
            )

    @property
    def fc(self) -> int:
        return (self.n - 1) // 2

    @property
    def separation(self) -> float:
        return 2.0 / self.n if self.delta_min is None else float(self.delta_min)

    def estimator_config(self) -> CBLassoConfig:
        base = self.solver or CBLassoConfig(lambda_frac=1.0)
        kw = asdict_shallow(base)
        kw.update(
            lam=self.lam,
            lambda_frac=None if self.lam is not None else self.lambda_frac,
            compute_lambda_min=self.compute_lambda_min or base.compute_lambda_min,
        )
        return CBLassoConfig(**kw)


def asdict_shallow(obj) -> dict:
    return {f: getattr(obj, f) for f in obj.__dataclass_fields__}


def generate_instance(
    cfg: ExperimentConfig, rng: np.random.Generator
) -> tuple[AtomicMeasure, NDArray[np.complex128], NDArray[np.complex128]]:
    """Draw separated spikes, amplitudes and noise; return ``(mu0, y, eps)``.

    Raises:
        PlacementError: if rejection sampling fails.
    """
    op = FourierOperator.from_size(cfg.n)
    s0 = cfg.s0
    for _ in range(MAX_PLACEMENT_ROUNDS):
        t = rng.uniform(0.0, 1.0, s0)
        if s0 < 2:
            break
        d = torus_distance(t[:, None], t[None, :])
        if d[~np.eye(s0, dtype=bool)].min() >= cfg.separation:
            break
    else:
        raise PlacementError(f"no admissible placement after {MAX_PLACEMENT_ROUNDS} rounds")
    if cfg.amplitudes == "pm1":
        a = rng.choice([-1.0, 1.0], s0).astype(complex)
    elif cfg.amplitudes == "complex-unit":
        a = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, s0))
    else:
        a = np.asarray(cfg.custom_amplitudes, dtype=complex)
    mu0 = AtomicMeasure(t, a)
    eps = sample_noise(op, cfg.sigma0, rng)
    return mu0, fourier_coefficients(op, mu0) + eps, eps


def match_spikes(mu0: AtomicMeasure, mu_hat: AtomicMeasure) -> tuple[NDArray, NDArray]:
    """For each true spike: distance to the nearest estimate and that estimate's amplitude (0 if none)."""
    if mu_hat.size == 0:
        return np.full(mu0.size, 0.5), np.zeros(mu0.size, dtype=complex)
    d = torus_distance(mu0.positions[:, None], mu_hat.positions[None, :])
    d = np.atleast_2d(d)
    j = d.argmin(axis=1)
    return d[np.arange(mu0.size), j], mu_hat.amplitudes[j]


def amplitude_error(mu0: AtomicMeasure, mu_hat: AtomicMeasure, radius: float) -> float:
    """Root-mean-square amplitude error; a true spike without an estimate within ``radius`` counts as 0."""
    if mu0.size == 0:
        return 0.0
    dist, amp = match_spikes(mu0, mu_hat)
    amp = np.where(dist <= radius, amp, 0.0)
    return float(np.sqrt(np.mean(np.abs(amp - mu0.amplitudes) ** 2)))


@dataclass
class ExperimentRecord:
    replica: int
    true_positions: list[float]
    true_amplitudes: list[complex]
    est_positions: list[float]
    est_amplitudes: list[complex]
    sigma_hat: float
    sigma_blasso: float
    noise_norm: float
    lambda_used: float
    lambda_max: float
    lambda_min: float | None
    regime: str
    max_spike_distance: float
    support_success: bool
    amp_error_cblasso: float
    amp_error_blasso: float
    runtime: float
    flags: list[str] = field(default_factory=list)
    error: str | None = None

    CSV_FIELDS = (
        "replica",
        "regime",
        "sigma_hat",
        "sigma_blasso",
        "noise_norm",
        "lambda_used",
        "lambda_max",
        "lambda_min",
        "n_true",
        "n_est",
        "max_spike_distance",
        "support_success",
        "amp_error_cblasso",
        "amp_error_blasso",
        "runtime",
        "true_atoms",
        "est_atoms",
        "flags",
        "error",
    )

    def csv_row(self) -> dict:
        atoms = lambda t, a: json.dumps([[x, z.real, z.imag] for x, z in zip(t, a)])  # noqa: E731
        return {
            "replica": self.replica,
            "regime": self.regime,
            "sigma_hat": repr(self.sigma_hat),
            "sigma_blasso": repr(self.sigma_blasso),
            "noise_norm": repr(self.noise_norm),
            "lambda_used": repr(self.lambda_used),
            "lambda_max": repr(self.lambda_max),
            "lambda_min": "" if self.lambda_min is None else repr(self.lambda_min),
            "n_true": len(self.true_positions),
            "n_est": len(self.est_positions),
            "max_spike_distance": repr(self.max_spike_distance),
            "support_success": int(self.support_success),
            "amp_error_cblasso": repr(self.amp_error_cblasso),
            "amp_error_blasso": repr(self.amp_error_blasso),
            # wall-clock time is left out of the CSV so reruns are byte-identical
            "runtime": "",
            "true_atoms": atoms(self.true_positions, self.true_amplitudes),
            "est_atoms": atoms(self.est_positions, self.est_amplitudes),
            "flags": ";".join(self.flags),
            "error": self.error or "",
        }


def run_replica(cfg: ExperimentConfig, index: int, rng: np.random.Generator) -> ExperimentRecord:
    """Generate one instance and fit both estimators on it."""
    op = FourierOperator.from_size(cfg.n)
    mu0, y, eps = generate_instance(cfg, rng)
    radius = cfg.c1 / cfg.fc
    start = time.perf_counter()
    base = dict(
        replica=index,
        true_positions=mu0.positions.tolist(),
        true_amplitudes=mu0.amplitudes.tolist(),
        noise_norm=float(np.linalg.norm(eps)),
    )
    try:
        res: CBLassoResult = solve_pipeline(op, y, cfg.estimator_config())
    except Exception as exc:  # recorded, the study goes on
        logger.warning("replica %d failed: %s", index, exc)
        nan = float("nan")
        return ExperimentRecord(
            **base,
            est_positions=[],
            est_amplitudes=[],
            sigma_hat=nan,
            sigma_blasso=nan,
            lambda_used=nan,
            lambda_max=nan,
            lambda_min=None,
            regime="failed",
            max_spike_distance=nan,
            support_success=False,
            amp_error_cblasso=nan,
            amp_error_blasso=nan,
            runtime=time.perf_counter() - start,
            error=f"{type(exc).__name__}: {exc}",
        )
    mu = res.mu_hat
    if mu.size:
        zeta = res.dual_poly(mu.positions)
        bl = fit_blasso(op, y, mu.positions, zeta / np.abs(zeta), sigma_fixed=cfg.sigma0)
        mu_bl, sigma_bl = bl.measure, bl.sigma_heuristic
    else:
        mu_bl = mu
        sigma_bl = float(np.linalg.norm(y) / np.sqrt(op.n))
    dist, _ = match_spikes(mu0, mu)
    max_d = float(dist.max()) if dist.size else 0.0
    return ExperimentRecord(
        **base,
        est_positions=mu.positions.tolist(),
        est_amplitudes=mu.amplitudes.tolist(),
        sigma_hat=res.sigma_hat,
        sigma_blasso=sigma_bl,
        lambda_used=res.lambda_used,
        lambda_max=res.lambda_max,
        lambda_min=res.lambda_min,
        regime=res.regime.value,
        max_spike_distance=max_d,
        support_success=bool(max_d <= radius),
        amp_error_cblasso=amplitude_error(mu0, mu, radius),
        amp_error_blasso=amplitude_error(mu0, mu_bl, radius),
        runtime=time.perf_counter() - start,
        flags=list(res.flags),
    )


def _quartiles(x: NDArray) -> dict:
    x = x[np.isfinite(x)]
    if x.size == 0:
        return {"q1": None, "median": None, "q3": None}
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {"q1": float(q1), "median": float(med), "q3": float(q3)}


def summarize(cfg: ExperimentConfig, records: list[ExperimentRecord]) -> dict:
    """Medians and quartiles of the per-replica metrics plus success rates."""
    ok = [r for r in records if r.error is None]
    arr = lambda name: np.array([getattr(r, name) for r in ok], dtype=float)  # noqa: E731
    target = np.sqrt(2) * cfg.sigma0
    sig = arr("sigma_hat")
    sbl = arr("sigma_blasso")
    nn = arr("noise_norm")
    regimes: dict[str, int] = {}
    for r in records:
        regimes[r.regime] = regimes.get(r.regime, 0) + 1
    return {
        "replicas": len(records),
        "failures": len(records) - len(ok),
        "sigma0": cfg.sigma0,
        "target_sigma": target,
        "bias_factor": sigma_bias_factor(cfg.n),
        "sigma_hat": _quartiles(sig),
        "sigma_hat_over_sqrt2": _quartiles(sig / np.sqrt(2)),
        "sigma_blasso": _quartiles(sbl),
        "abs_err_sigma_hat": _quartiles(np.abs(sig - target)),
        "abs_err_sigma_blasso": _quartiles(np.abs(sbl - target)),
        "sigma_ratio_to_noise": _quartiles(np.sqrt(cfg.n) * sig / nn),
        "support_success_rate": float(np.mean([r.support_success for r in ok])) if ok else None,
        "amp_error_cblasso": _quartiles(arr("amp_error_cblasso")),
        "amp_error_blasso": _quartiles(arr("amp_error_blasso")),
        "regimes": regimes,
        "total_runtime": float(sum(r.runtime for r in records)),
    }


def run_experiment(cfg: ExperimentConfig) -> tuple[list[ExperimentRecord], dict]:
    """Run all replicas, each on its own seeded substream, and summarize them."""
    rngs = spawn_generators(cfg.seed, cfg.replicas)
    records = map_chunks(lambda args: run_replica(cfg, *args), list(enumerate(rngs)))
    return records, summarize(cfg, records)


def write_records_csv(records: list[ExperimentRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ExperimentRecord.CSV_FIELDS)
        w.writeheader()
        for r in records:
            w.writerow(r.csv_row())


def write_summary_json(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)


def dipole(eps: float) -> AtomicMeasure:
    """``delta_eps - delta_{-eps}``."""
    return AtomicMeasure([eps, -eps], [1.0, -1.0])


def dipole_coefficients(op: FourierOperator, eps: float) -> NDArray[np.complex128]:
    """Closed form ``c_k = -2i sin(2 pi k eps)`` of the dipole's coefficients."""
    return -2j * np.sin(2 * np.pi * op.frequencies * eps)


@dataclass(frozen=True)
class CompatPoint:
    eps: float
    value: float
    closed_form: float
    coef_error: float


def compatibility_curve(op: FourierOperator, eps_list: ArrayLike) -> list[CompatPoint]:
    """``||F_n(dipole_eps)||^2 / n`` for each ``eps``.

    The value is computed from the sampled coefficients and compared with the
    closed form ``(1/n) sum_k 4 sin^2(2 pi k eps)``.
    """
    out = []
    for e in np.atleast_1d(np.asarray(eps_list, dtype=float)):
        if e <= 0:
            raise ValueError("eps values must be positive")
        c = fourier_coefficients(op, dipole(e))
        closed = dipole_coefficients(op, e)
        out.append(
            CompatPoint(
                eps=float(e),
                value=float(np.vdot(c, c).real / op.n),
                closed_form=float(np.sum(4 * np.sin(2 * np.pi * op.frequencies * e) ** 2) / op.n),
                coef_error=float(np.abs(c - closed).max()),
            )
        )
    return out


def write_compat_csv(points: list[CompatPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "value", "closed_form", "coef_error"])
        for p in points:
            w.writerow([repr(p.eps), repr(p.value), repr(p.closed_form), repr(p.coef_error)])


def records_to_json(records: list[ExperimentRecord]) -> list[dict]:
    def enc(v):
        if isinstance(v, complex):
            return [v.real, v.imag]
        if isinstance(v, list):
            return [enc(x) for x in v]
        return v

    return [{k: enc(v) for k, v in asdict(r).items()} for r in records]
