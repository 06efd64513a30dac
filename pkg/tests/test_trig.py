from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dense_sup, direct_eval
from scipy import integrate

from cblasso.certificates import build_interpolant
from cblasso.measures import FourierOperator
from cblasso.trig import (
    ConstantModulusError,
    TrigPoly,
    batch_sup_modulus,
    eval_grid,
    l1_norm,
    modulus_squared,
    sup_modulus,
    unit_modulus_roots,
)


def random_poly(rng, d):
    return TrigPoly(rng.normal(size=2 * d + 1) + 1j * rng.normal(size=2 * d + 1))


def monomial(k, scale=1.0):
    c = np.zeros(2 * abs(k) + 1, dtype=complex)
    c[abs(k) + k] = scale
    return TrigPoly(c)


def test_rejects_even_length():
    with pytest.raises(ValueError):
        TrigPoly(np.ones(4))


def test_evaluation_matches_definition(rng):
    p = random_poly(rng, 5)
    t = rng.uniform(size=20)
    np.testing.assert_allclose(p(t), direct_eval(p.coef, t), atol=1e-12)
    assert isinstance(p(0.3), complex)


def test_derivative_coefficients(rng):
    p = random_poly(rng, 4)
    np.testing.assert_allclose(p.derivative().coef, 2j * np.pi * np.arange(-4, 5) * p.coef)
    t, h = 0.37, 1e-6
    fd = (p(t + h) - p(t - h)) / (2 * h)
    assert abs(p.derivative()(t) - fd) < 1e-5 * abs(fd)


def test_eval_grid_examples(rng):
    np.testing.assert_allclose(eval_grid(TrigPoly([1.0]), 8), np.ones(8))
    np.testing.assert_allclose(eval_grid(monomial(1), 4), [1, 1j, -1, -1j], atol=1e-15)
    p = random_poly(rng, 10)
    ref = direct_eval(p.coef, np.arange(64) / 64)
    np.testing.assert_allclose(eval_grid(p, 64), ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())
    with pytest.raises(ValueError):
        eval_grid(p, 20)


def test_modulus_squared_examples(rng):
    c = 0.3 - 1.2j
    np.testing.assert_allclose(modulus_squared(TrigPoly([c])).coef, [abs(c) ** 2])
    h = modulus_squared(monomial(1))
    np.testing.assert_allclose(h(np.linspace(0, 1, 7)), 1.0, atol=1e-15)
    p = random_poly(rng, 6)
    t = np.arange(256) / 256
    np.testing.assert_allclose(modulus_squared(p)(t).real, np.abs(direct_eval(p.coef, t)) ** 2, atol=1e-10)


@settings(max_examples=40)
@given(st.integers(0, 12), st.integers(0, 2**31))
def test_modulus_squared_is_hermitian(d, seed):
    h = modulus_squared(random_poly(np.random.default_rng(seed), d))
    assert h.degree == 2 * d
    np.testing.assert_allclose(h.coef[::-1], np.conj(h.coef), atol=1e-14 * np.abs(h.coef).max())


def test_sup_modulus_examples(rng):
    for fc in (1, 7, 40):
        val, arg = sup_modulus(TrigPoly(np.ones(2 * fc + 1)))
        assert val == pytest.approx(2 * fc + 1, rel=1e-12)
        assert min(arg, 1 - arg) < 1e-9
    assert sup_modulus(monomial(3, 0.5))[0] == pytest.approx(0.5, abs=1e-15)
    p = random_poly(rng, 8)
    assert sup_modulus(p)[0] == pytest.approx(dense_sup(p.coef), abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31), st.floats(0, 2 * np.pi))
def test_sup_modulus_rotation_invariance(d, seed, theta):
    p = random_poly(np.random.default_rng(seed), d)
    v1, a1 = sup_modulus(p)
    v2, a2 = sup_modulus(TrigPoly(np.exp(1j * theta) * p.coef))
    assert v1 == pytest.approx(v2, abs=1e-12 * v1)
    assert min(abs(a1 - a2), 1 - abs(a1 - a2)) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31))
def test_bernstein_inequality(d, seed):
    p = random_poly(np.random.default_rng(seed), d)
    grid = 8192
    sup_p = np.abs(eval_grid(p, grid)).max()
    sup_dp = np.abs(eval_grid(p.derivative(), grid)).max()
    assert sup_dp <= 2 * np.pi * d * sup_modulus(p)[0] * (1 + 1e-9)
    assert sup_p <= sup_modulus(p)[0] * (1 + 1e-12)


def test_batch_sup_matches_scalar(rng):
    C = rng.normal(size=(40, 21)) + 1j * rng.normal(size=(40, 21))
    ref = np.array([sup_modulus(TrigPoly(c))[0] for c in C])
    np.testing.assert_allclose(batch_sup_modulus(C), ref, rtol=1e-9)


def test_roots_of_analytic_example():
    # |p|^2 = 1 - sin^2(2 pi t) = cos^2(2 pi t) for p = cos(2 pi t)
    p = TrigPoly([0.5, 0, 0.5])
    roots = unit_modulus_roots(p)
    np.testing.assert_allclose(roots.points, [0.0, 0.5], atol=1e-12)
    assert np.all(np.abs(roots.residuals) < 1e-12)


def test_roots_empty_below_unit_modulus(rng):
    p = random_poly(rng, 5)
    p = TrigPoly(0.9 * p.coef / sup_modulus(p)[0])
    assert len(unit_modulus_roots(p, 1e-3)) == 0


def test_roots_constant_modulus_is_signalled():
    with pytest.raises(ConstantModulusError):
        unit_modulus_roots(monomial(2))


@pytest.mark.parametrize("fc", [30, 80])
def test_roots_recover_certificate_nodes(fc):
    nodes = np.array([0.1, 0.45, 0.8])
    cert = build_interpolant(FourierOperator(fc), nodes, [1, -1, 1j])
    roots = unit_modulus_roots(cert.poly)
    np.testing.assert_allclose(roots.points, nodes, atol=1e-6)


def test_roots_are_separated(rng):
    cert = build_interpolant(FourierOperator(40), [0.05, 0.3, 0.62, 0.9], np.ones(4))
    pts = unit_modulus_roots(cert.poly).points
    gaps = np.diff(np.concatenate([pts, [pts[0] + 1]]))
    assert gaps.min() > 1 / (16 * 4096)


def test_l1_norm_examples():
    assert l1_norm(TrigPoly([2 - 1j])) == pytest.approx(abs(2 - 1j))
    assert l1_norm(monomial(1)) == pytest.approx(1.0)
    # squared Fejer-type kernel of small order against adaptive quadrature
    m = 3
    base = 1 - np.abs(np.arange(-(m - 1), m)) / m
    p = TrigPoly(np.convolve(base, base) - 0.3 * np.eye(1, 2 * (2 * m - 2) + 1, 2 * m - 2)[0])
    ref, _ = integrate.quad(lambda t: abs(direct_eval(p.coef, t)), 0, 1, limit=400, epsabs=1e-12)
    assert l1_norm(p) == pytest.approx(ref, abs=1e-6)
