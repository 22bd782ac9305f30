import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dicke_usc.algebra import laguerre
from dicke_usc.dsc import (cos_matrix, dsc_levels, first_order, jz_in_jx_basis, second_order,
                           sin_matrix)
from dicke_usc.models import ModelParams, quadrature_function
from dicke_usc.spectrum import adaptive_solve


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 20), st.floats(0.0, 3.0))
def test_cos_diagonal_identity(n, eta):
    c = cos_matrix(eta, n + 1)[n, n]
    assert abs(c - np.exp(-2 * eta**2) * laguerre(n, 4 * eta**2)) < 1e-8


def test_cos_sin_match_spectral_calculus():
    eta = 0.9
    c_ref = quadrature_function(200, lambda x: np.cos(2 * eta * x))[:20, :20]
    s_ref = quadrature_function(200, lambda x: np.sin(2 * eta * x))[:20, :20]
    assert np.abs(cos_matrix(eta, 20) - c_ref).max() < 1e-10
    assert np.abs(sin_matrix(eta, 20) - s_ref).max() < 1e-10
    assert np.allclose(np.diag(sin_matrix(eta, 20)), 0.0)


def test_jz_in_jx_basis():
    m, jz = jz_in_jx_basis(1.5)
    assert np.allclose(m, [-1.5, -0.5, 0.5, 1.5])
    assert np.allclose(np.diag(jz), 0.0)
    assert np.allclose(np.linalg.eigvalsh(jz), m)


def test_first_order_formula():
    eta, n = 1.2, 3
    shift = first_order(n, 1.0, eta)
    scale = np.exp(-2 * eta**2) * laguerre(n, 4 * eta**2)
    assert np.allclose(np.sort(shift), np.sort(scale * np.array([-1.0, 0.0, 1.0])))


def test_second_order_truncation_converged():
    a = second_order(2, 1.0, 1.5)
    b = second_order(2, 1.0, 1.5, q_max=2 * a.q_max)
    assert a.converged
    assert np.allclose(a.second_order, b.second_order, atol=1e-13)


def test_order_validation():
    with pytest.raises(ValueError):
        dsc_levels(ModelParams(1, lam=2.0), 2, order=3)
    with pytest.raises(ValueError):
        dsc_levels(ModelParams(2, (1.0, 1.2), 2.0), 2)
    with pytest.raises(ValueError):
        second_order(3, 0.5, 1.0, q_max=2)


def test_zero_order_ladder():
    lv = dsc_levels(ModelParams(2, lam=4.0), 2, order=0)
    assert np.allclose(lv, np.repeat([0.0, 1.0, 2.0], 4))


@pytest.mark.parametrize("N,lam,tol", [(1, 3.0, 1e-4), (2, 3.0, 1e-3), (2, 10.0, 1e-6)])
def test_perturbation_theory_against_exact(N, lam, tol):
    p = ModelParams(N, lam=lam)
    exact = adaptive_solve(p, 8, tol=1e-10).energies
    approx = dsc_levels(p, 4, order=2)[:8]
    assert np.abs(exact - approx).max() < tol


def test_second_order_improves_on_first():
    p = ModelParams(1, lam=2.5)
    exact = adaptive_solve(p, 8, tol=1e-10).energies
    e1 = np.abs(dsc_levels(p, 4, 1)[:8] - exact).max()
    e2 = np.abs(dsc_levels(p, 4, 2)[:8] - exact).max()
    assert e2 < 0.1 * e1
