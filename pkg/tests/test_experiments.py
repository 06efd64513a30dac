from __future__ import annotations

import json

import numpy as np
import pytest

from cblasso.experiments import (
    ExperimentConfig,
    PlacementError,
    amplitude_error,
    compatibility_curve,
    dipole,
    dipole_coefficients,
    generate_instance,
    match_spikes,
    records_to_json,
    run_experiment,
    write_compat_csv,
    write_records_csv,
    write_summary_json,
)
from cblasso.measures import AtomicMeasure, FourierOperator, fourier_coefficients, torus_distance


def test_single_spike_any_position():
    cfg = ExperimentConfig(n=21, s0=1, delta_min=0.9)
    mu0, y, _ = generate_instance(cfg, np.random.default_rng(0))
    assert mu0.size == 1


def test_infeasible_placement():
    with pytest.raises(PlacementError):
        ExperimentConfig(n=21, s0=3, delta_min=0.4)


def test_separation_respected(rng):
    cfg = ExperimentConfig(n=41, s0=5, delta_min=0.15)
    for _ in range(20):
        mu0, _, _ = generate_instance(cfg, rng)
        d = torus_distance(mu0.positions[:, None], mu0.positions[None, :])
        assert d[~np.eye(5, dtype=bool)].min() >= 0.15


def test_noiseless_generation(rng):
    cfg = ExperimentConfig(n=31, s0=3, sigma0=0.0)
    mu0, y, eps = generate_instance(cfg, rng)
    np.testing.assert_array_equal(eps, 0)
    np.testing.assert_allclose(y, fourier_coefficients(FourierOperator(15), mu0))


@pytest.mark.parametrize("scheme", ["pm1", "complex-unit"])
def test_amplitude_schemes(rng, scheme):
    mu0, _, _ = generate_instance(ExperimentConfig(n=31, amplitudes=scheme), rng)
    np.testing.assert_allclose(np.abs(mu0.amplitudes), 1.0)
    if scheme == "pm1":
        assert set(mu0.amplitudes.real) <= {-1.0, 1.0}


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n=20)
    with pytest.raises(ValueError):
        ExperimentConfig(amplitudes="custom")
    with pytest.raises(ValueError):
        ExperimentConfig(amplitudes="bogus")
    cfg = ExperimentConfig(amplitudes="custom", custom_amplitudes=(1, 2j, -1))
    assert cfg.estimator_config().lambda_frac == 0.5
    assert ExperimentConfig(lam=0.3).estimator_config().lam == 0.3


def test_match_and_amplitude_error():
    mu0 = AtomicMeasure([0.1, 0.5], [1.0, -1.0])
    hat = AtomicMeasure([0.101, 0.9], [0.8, 2.0])
    dist, amp = match_spikes(mu0, hat)
    np.testing.assert_allclose(dist, [0.001, 0.399])
    assert amplitude_error(mu0, hat, 0.01) == pytest.approx(np.sqrt((0.2**2 + 1.0) / 2))
    assert amplitude_error(mu0, AtomicMeasure.empty(), 0.01) == pytest.approx(1.0)


def test_small_study_and_determinism(tmp_path):
    cfg = ExperimentConfig(n=31, s0=2, sigma0=0.3, replicas=4, seed=42)
    records, summary = run_experiment(cfg)
    assert len(records) == 4 and summary["failures"] == 0
    assert summary["support_success_rate"] >= 0.75
    write_records_csv(records, tmp_path / "a.csv")
    records2, _ = run_experiment(cfg)
    write_records_csv(records2, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    write_summary_json(summary, tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["replicas"] == 4
    assert len(records_to_json(records)) == 4


def test_small_noise_drifts_to_exact_fit():
    cfg = ExperimentConfig(n=15, s0=2, sigma0=1e-9, replicas=2, seed=1, lambda_frac=0.02)
    records, summary = run_experiment(cfg)
    assert all(r.sigma_hat < 1e-6 for r in records)


def test_compat_examples(tmp_path):
    pt = compatibility_curve(FourierOperator(1), [0.25])[0]
    assert pt.value == pytest.approx(8 / 3, abs=1e-12)
    assert pt.closed_form == pytest.approx(8 / 3, abs=1e-12)
    op = FourierOperator(80)
    for e in (0.1, 0.013, 1e-4):
        c = fourier_coefficients(op, dipole(e))
        np.testing.assert_allclose(c, dipole_coefficients(op, e), atol=1e-12)
    pts = compatibility_curve(op, 2.0 ** -np.arange(8, 20))
    vals = [p.value for p in pts]
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] < 1e-3 * vals[0]
    write_compat_csv(pts, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().startswith("eps,value,closed_form,coef_error")
    with pytest.raises(ValueError):
        compatibility_curve(op, [0.0])
