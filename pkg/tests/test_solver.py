from __future__ import annotations

import json

import numpy as np
import pytest
from conftest import random_instance
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import cd_lasso, discretized_primal_value, direct_eval

from cblasso.measures import AtomicMeasure, FourierOperator, fourier_coefficients, torus_distance
from cblasso.sdp import SolverConfig
from cblasso.solver import (
    CBLassoConfig,
    NonConvergenceError,
    Regime,
    alternating_minimization,
    extract_support,
    lambda_max,
    primal_objective,
    solve_bme,
    solve_dual,
    solve_pipeline,
)
from cblasso.trig import TrigPoly, sup_modulus


def dirac_obs(fc, t=0.0, a=1.0):
    op = FourierOperator(fc)
    return op, fourier_coefficients(op, AtomicMeasure([t], [a]))


def test_config_validation():
    with pytest.raises(ValueError):
        CBLassoConfig()
    with pytest.raises(ValueError):
        CBLassoConfig(lam=1.0, lambda_frac=0.5)
    with pytest.raises(ValueError):
        CBLassoConfig(lambda_frac=1.5)
    with pytest.raises(ValueError):
        CBLassoConfig(lam=-1.0)


@pytest.mark.parametrize("fc", [1, 8, 40])
def test_lambda_max_of_dirac_is_one(fc):
    op, y = dirac_obs(fc)
    assert lambda_max(op, y) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_lambda_max_scale_invariant(seed, beta):
    rng = np.random.default_rng(seed)
    op = FourierOperator(6)
    y = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
    assert lambda_max(op, beta * y) == pytest.approx(lambda_max(op, y), rel=1e-10)


def test_lambda_max_dense_grid(rng):
    op = FourierOperator(8)
    y = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
    t = np.arange(1_000_000) / 1_000_000
    ref = np.abs(direct_eval(y, t)).max() / (np.sqrt(op.n) * np.linalg.norm(y))
    assert lambda_max(op, y) == pytest.approx(ref, abs=1e-8)


def test_lambda_max_rejects_zero():
    with pytest.raises(ValueError):
        lambda_max(FourierOperator(2), np.zeros(5))


def test_dual_above_lambda_max_closed_form(rng):
    op = FourierOperator(10)
    y = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
    lam = 1.2 * lambda_max(op, y)
    dual = solve_dual(op, y, lam)
    ref = y / (np.sqrt(op.n) * lam * np.linalg.norm(y))
    np.testing.assert_allclose(dual.c_hat, ref, atol=1e-14)
    h = np.abs(dual.poly(np.linspace(0, 1, 512))) ** 2
    assert h.max() - h.min() > 1e-4
    big = solve_dual(op, y, 1e6)
    assert np.linalg.norm(big.c_hat) < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_dual_matches_discretized_primal(seed):
    rng = np.random.default_rng(seed)
    op = FourierOperator(1)
    y = rng.normal(size=3) + 1j * rng.normal(size=3)
    lam = 0.5 * lambda_max(op, y)
    dual = solve_dual(op, y, lam)
    assert dual.objective(y) == pytest.approx(discretized_primal_value(y, lam), rel=1e-3)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.2, 1.0))
def test_dual_feasibility(seed, frac):
    op, _, y, _ = random_instance(10, seed)
    lam = frac * lambda_max(op, y)
    dual = solve_dual(op, y, lam)
    assert dual.converged
    assert sup_modulus(dual.poly)[0] <= 1 + 1e-5
    assert dual.ball_value <= 1 + 1e-4


def test_bme_dirac_objective_one():
    op, y = dirac_obs(10, 0.0)
    c, lmin = solve_bme(op, y)
    assert np.vdot(c, y).real == pytest.approx(1.0, abs=1e-5)
    assert lmin > 1 / np.sqrt(op.n)


@pytest.mark.parametrize("seed", range(3))
def test_lambda_min_above_inverse_root_n(seed):
    op, _, y, _ = random_instance(8, seed)
    c, lmin = solve_bme(op, y)
    assert np.linalg.norm(c) < 1
    assert lmin > 1 / np.sqrt(op.n)
    c2, lmin2 = solve_bme(op, 3.7 * y)
    np.testing.assert_allclose(c2, c, atol=1e-5)
    assert lmin2 == pytest.approx(lmin, rel=1e-5)


def test_support_recovery_three_spikes():
    op, mu0, y, _ = random_instance(80, 4, sigma=0.3)
    cfg = CBLassoConfig(lambda_frac=0.5)
    dual = solve_dual(op, y, 0.5 * lambda_max(op, y), cfg)
    roots = extract_support(dual, cfg)
    assert len(roots) == 3
    assert torus_distance(np.sort(roots.points), mu0.positions).max() < 1e-3


def test_alternating_noiseless_least_squares():
    op = FourierOperator(10)
    mu0 = AtomicMeasure([0.1, 0.5, 0.8], [1.0, -1.0, 0.5j])
    y = fourier_coefficients(op, mu0)
    zeta = mu0.amplitudes / np.abs(mu0.amplitudes)
    a, sigma, _, _ = alternating_minimization(op, y, mu0.positions, 1e-12, zeta)
    np.testing.assert_allclose(a, mu0.amplitudes, atol=1e-8)
    assert sigma < 1e-8


def test_alternating_single_spike_exact_pinv():
    op, y = dirac_obs(6, 0.3, 2 - 1j)
    cfg = CBLassoConfig(lam=1e-3, penalty_scale=0.0)
    a, sigma, it, _ = alternating_minimization(op, y, [0.3], 1e-3, [1.0], cfg)
    assert a[0] == pytest.approx(2 - 1j, abs=1e-13)
    assert sigma < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_fixed_sigma_amplitudes_match_coordinate_descent(seed):
    op, mu0, y, _ = random_instance(6, seed, s=2, sigma=0.3)
    sigma0, lam = 0.3, 0.02
    X = op.design(mu0.positions)
    ref = cd_lasso(X, y, lam, sigma0, n=op.n)
    assert np.all(ref != 0)
    zeta = ref / np.abs(ref)
    cfg = CBLassoConfig(lam=lam, max_iter=1)
    a, _, _, _ = alternating_minimization(op, y, mu0.positions, lam, zeta, cfg, sigma_init=sigma0)
    np.testing.assert_allclose(a, ref, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_pipeline_interior_identities(seed):
    op, mu0, y, _ = random_instance(15, seed)
    res = solve_pipeline(op, y, CBLassoConfig(lambda_frac=0.5, tol_sigma=1e-12))
    assert res.regime is Regime.INTERIOR
    resid = np.linalg.norm(y - fourier_coefficients(op, res.mu_hat)) / np.sqrt(op.n)
    assert res.sigma_hat == pytest.approx(resid, abs=1e-8)
    assert res.lambda_hat == pytest.approx(res.lambda_used * res.sigma_hat)
    assert res.kkt_residual < 1e-3
    link = y - op.n * res.lambda_hat * res.c_hat - fourier_coefficients(op, res.mu_hat)
    assert np.linalg.norm(link) <= 1e-4 * np.linalg.norm(y)
    p = TrigPoly(res.c_hat)
    sub = np.sum(np.conj(p(res.mu_hat.positions)) * res.mu_hat.amplitudes).real
    assert sub == pytest.approx(res.mu_hat.tv_norm(), abs=1e-5 * (1 + res.mu_hat.tv_norm()))
    primal = primal_objective(op, y, res.mu_hat, res.sigma_hat, res.lambda_used)
    dual = res.lambda_used * np.vdot(res.c_hat, y).real
    assert primal - dual <= 1e-3 * (1 + abs(primal))


def test_pipeline_null_regime(rng):
    op = FourierOperator(8)
    y = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
    res = solve_pipeline(op, y, CBLassoConfig(lam=1.01 * lambda_max(op, y)))
    assert res.regime is Regime.NULL
    assert res.mu_hat.size == 0
    assert res.sigma_hat == pytest.approx(np.linalg.norm(y) / np.sqrt(op.n))


def test_pipeline_real_amplitudes_stay_real():
    op, mu0, y, _ = random_instance(40, 11, sigma=0.0)
    res = solve_pipeline(op, y, CBLassoConfig(lambda_frac=0.5))
    assert res.mu_hat.size == 3
    assert np.abs(res.mu_hat.amplitudes.imag).max() < 1e-5


def test_phase_equivariance():
    op, _, y, _ = random_instance(15, 21)
    cfg = CBLassoConfig(lambda_frac=0.5, tol_sigma=1e-12, compute_lambda_min=True)
    r1 = solve_pipeline(op, y, cfg)
    rot = np.exp(0.7j)
    r2 = solve_pipeline(op, rot * y, cfg)
    assert r2.sigma_hat == pytest.approx(r1.sigma_hat, abs=1e-6)
    assert r2.lambda_max == pytest.approx(r1.lambda_max, abs=1e-8)
    assert r2.lambda_min == pytest.approx(r1.lambda_min, rel=1e-5)
    np.testing.assert_allclose(r2.mu_hat.positions, r1.mu_hat.positions, atol=1e-6)
    np.testing.assert_allclose(r2.mu_hat.amplitudes, rot * r1.mu_hat.amplitudes, atol=1e-5)
    np.testing.assert_allclose(r2.c_hat, rot * r1.c_hat, atol=1e-5)


def test_overfitting_gate():
    op, _, y, _ = random_instance(8, 2, s=2, sigma=0.5)
    _, lmin = solve_bme(op, y)
    res = solve_pipeline(op, y, CBLassoConfig(lam=0.9 * lmin, compute_lambda_min=True))
    assert res.regime is Regime.OVERFITTING
    assert res.sigma_hat == 0.0


def test_result_json_roundtrip():
    op, _, y, _ = random_instance(10, 5)
    res = solve_pipeline(op, y, CBLassoConfig(lambda_frac=0.5))
    data = json.loads(res.dumps())
    for key in ("regime", "sigma_hat", "lambda", "lambda_hat", "measure", "kkt_residual", "iterations"):
        assert key in data
    assert AtomicMeasure.from_json(data["measure"]) == res.mu_hat


def test_strict_mode_raises_on_cap():
    op, _, y, _ = random_instance(15, 1)
    cfg = CBLassoConfig(lambda_frac=0.5, strict=True, solver=SolverConfig(max_iters=2))
    with pytest.raises(NonConvergenceError) as info:
        solve_pipeline(op, y, cfg)
    assert "iterations" in info.value.diagnostics
    loose = CBLassoConfig(lambda_frac=0.5, solver=SolverConfig(max_iters=2))
    assert "dual-not-converged" in solve_pipeline(op, y, loose).flags
