from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import discretized_dual_value, sdp_value

from cblasso.sdp import (
    ConicProblem,
    SolverConfig,
    SolverNaNError,
    SolverStatus,
    psd_project,
    solve_conic,
)
from cblasso.trig import TrigPoly, sup_modulus


def random_hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (A + A.conj().T)


def random_b(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def test_psd_project_examples():
    np.testing.assert_allclose(psd_project(np.eye(4)), np.eye(4), atol=1e-14)
    np.testing.assert_allclose(psd_project(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]), atol=1e-14)
    with pytest.raises(ValueError):
        psd_project(np.ones((2, 3)))


@settings(max_examples=30)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_psd_project_first_order_optimality(n, seed):
    rng = np.random.default_rng(seed)
    M = random_hermitian(rng, n)
    P = psd_project(M)
    assert np.linalg.eigvalsh(P).min() >= -1e-10
    R = P - M
    # residual is PSD and orthogonal to the projection (Moreau decomposition)
    assert np.linalg.eigvalsh(0.5 * (R + R.conj().T)).min() >= -1e-10
    assert abs(np.vdot(R, P)) <= 1e-10 * (1 + np.linalg.norm(M) ** 2)
    # no random PSD perturbation direction gets closer
    base = np.linalg.norm(P - M)
    for _ in range(10):
        B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        Q = P + 0.05 * (B @ B.conj().T)
        Q = psd_project(Q)
        assert np.linalg.norm(Q - M) >= base - 1e-12


@pytest.mark.parametrize("r", [0.0, 0.5, np.inf])
def test_zero_objective_gives_zero(r):
    sol = solve_conic(ConicProblem(np.zeros(5), r))
    assert sol.converged
    np.testing.assert_array_equal(sol.c, 0)


def test_zero_radius_forces_zero(rng):
    sol = solve_conic(ConicProblem(random_b(rng, 7), 0.0))
    np.testing.assert_array_equal(sol.c, 0)


def test_problem_validation():
    with pytest.raises(ValueError):
        ConicProblem(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        ConicProblem(np.ones(3), -1.0)
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    assert ConicProblem(np.ones(5)).block_dim == 6


@pytest.mark.parametrize("seed", range(3))
def test_small_instance_matches_discretized_dual(seed):
    rng = np.random.default_rng(seed)
    y = random_b(rng, 3)
    lam = 0.5 * sup_modulus(TrigPoly(y))[0] / (np.sqrt(3) * np.linalg.norm(y))
    r = 1 / (lam * np.sqrt(3))
    sol = solve_conic(ConicProblem(y, r))
    ref, _ = discretized_dual_value(y, r)
    val = np.vdot(sol.c, y).real
    assert sol.converged
    assert val == pytest.approx(ref, rel=1e-4)


@pytest.mark.parametrize("n,r", [(5, 0.6), (7, np.inf), (9, 0.3)])
def test_matches_generic_sdp_solver(n, r):
    rng = np.random.default_rng(n)
    b = random_b(rng, n)
    sol = solve_conic(ConicProblem(b, r))
    assert np.vdot(sol.c, b).real == pytest.approx(sdp_value(b, r), rel=1e-5)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31), st.sampled_from([0.2, 0.7, np.inf]))
def test_feasibility_invariants(fc, seed, r):
    n = 2 * fc + 1
    b = random_b(np.random.default_rng(seed), n)
    sol = solve_conic(ConicProblem(b, r))
    assert sol.status is SolverStatus.CONVERGED
    d = sol.diagnostics()
    assert d["min_eig"] >= -1e-6
    assert d["trace_violation"] <= 1e-6
    assert np.linalg.norm(sol.c) <= r + 1e-8
    assert sup_modulus(TrigPoly(sol.c))[0] <= 1 + 1e-5


def test_deterministic(rng):
    b = random_b(rng, 21)
    s1 = solve_conic(ConicProblem(b, 0.4))
    s2 = solve_conic(ConicProblem(b, 0.4))
    np.testing.assert_array_equal(s1.c, s2.c)
    np.testing.assert_array_equal(s1.gram, s2.gram)
    assert s1.iterations == s2.iterations


def test_max_iters_is_reported(rng):
    sol = solve_conic(ConicProblem(random_b(rng, 31), np.inf), SolverConfig(max_iters=3))
    assert sol.status is SolverStatus.MAX_ITERS
    assert not sol.converged
    assert sol.iterations == 3


def test_nan_aborts(rng, monkeypatch):
    import cblasso.sdp as sdp

    monkeypatch.setattr(sdp, "psd_project", lambda M: np.full_like(M, np.nan))
    with pytest.raises(SolverNaNError):
        solve_conic(ConicProblem(random_b(rng, 5), 1.0))
