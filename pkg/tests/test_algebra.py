import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.special import eval_genlaguerre

from dicke_usc.algebra import (DickeJ, DimensionError, FullProduct, HilbertSpace, Oscillator,
                               SparseOperator, destroy_matrix, displacement_matrix,
                               displacement_matrix_element, fock_destroy, kron, laguerre,
                               single_spin_op, spin_matrices, spin_ops)


@pytest.mark.parametrize("rep", [FullProduct(1), FullProduct(3), DickeJ(0.5), DickeJ(2), DickeJ(3.5)])
def test_su2_commutators(rep):
    m = {k: v.toarray() for k, v in spin_matrices(rep).items()}
    assert np.allclose(m["Jx"] @ m["Jy"] - m["Jy"] @ m["Jx"], 1j * m["Jz"], atol=1e-13)
    assert np.allclose(m["Jplus"], m["Jx"] + 1j * m["Jy"], atol=1e-13)
    assert np.allclose(m["Jminus"], m["Jplus"].conj().T)


def test_dicke_casimir():
    rep = DickeJ(2.5)
    m = {k: v.toarray() for k, v in spin_matrices(rep).items()}
    j2 = m["Jx"] @ m["Jx"] + m["Jy"] @ m["Jy"] + m["Jz"] @ m["Jz"]
    assert np.allclose(j2, 2.5 * 3.5 * np.eye(6))
    # ordered m = +j .. -j
    assert np.allclose(np.diag(m["Jz"]), np.arange(2.5, -3, -1))


def test_destroy_matrix_ladder():
    a = destroy_matrix(6).toarray()
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(np.diag(comm)[:-1], 1.0)
    assert np.isclose(comm[-1, -1], -6.0)


def test_space_dims():
    s = HilbertSpace(10, FullProduct(3))
    assert (s.photon_dim, s.spin_dim, s.total_dim) == (11, 8, 88)
    assert HilbertSpace(4, DickeJ(1)).total_dim == 15
    assert HilbertSpace(4, Oscillator(3)).total_dim == 20
    with pytest.raises(ValueError):
        HilbertSpace(0, FullProduct(1))
    with pytest.raises(ValueError):
        DickeJ(0.3)


def test_sparse_operator_checks():
    s = HilbertSpace(3, FullProduct(1))
    with pytest.raises(DimensionError):
        SparseOperator(s, sp.identity(5))
    bad = sp.identity(8, format="csr") * np.nan
    with pytest.raises(ValueError):
        SparseOperator(s, bad)
    a = fock_destroy(s)
    with pytest.raises(ValueError):
        SparseOperator(s, a.matrix, hermitian_hint=True)
    other = fock_destroy(HilbertSpace(3, FullProduct(2)))
    with pytest.raises(DimensionError):
        a + other


def test_operator_arithmetic():
    s = HilbertSpace(5, DickeJ(1))
    a = fock_destroy(s)
    n = a.dag() @ a
    assert n.hermiticity_residual() == 0.0
    x = a + a.dag()
    assert np.allclose((2.0 * x - x).toarray(), x.toarray())
    assert np.allclose((-x).toarray(), -x.toarray())
    comm = a.commutator(a.dag()).toarray().diagonal()
    assert np.allclose(comm[: -s.spin_dim], 1.0)
    v = np.ones(s.total_dim)
    assert np.allclose(n @ v, n.matrix @ v)


def test_kron_ordering():
    s = HilbertSpace(2, FullProduct(1))
    op = kron(destroy_matrix(2), sp.identity(2), s)
    assert np.allclose(op.toarray(), np.kron(destroy_matrix(2).toarray(), np.eye(2)))


def test_single_spin_op_requires_full_product():
    with pytest.raises(ValueError):
        single_spin_op(HilbertSpace(2, DickeJ(1)), 0, "minus")
    s = HilbertSpace(1, FullProduct(2))
    total = sum(single_spin_op(s, k, "z").toarray() for k in range(2))
    assert np.allclose(total, 2 * spin_ops(s)["Jz"].toarray())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 30), st.floats(0.0, 40.0), st.integers(0, 3))
def test_laguerre_matches_scipy(n, x, alpha):
    ref = eval_genlaguerre(n, alpha, x)
    assert np.isclose(laguerre(n, x, alpha), ref, rtol=1e-9, atol=1e-9 * max(1.0, abs(ref)))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_displacement_against_expm(re, im):
    alpha = re + 1j * im
    n = 80
    a = destroy_matrix(n - 1).toarray()
    ref = sla.expm(alpha * a.conj().T - np.conj(alpha) * a)
    got = displacement_matrix(alpha, 20)
    assert np.abs(got - ref[:20, :20]).max() < 1e-12


def test_displacement_large_indices_unitary():
    d = displacement_matrix(4.0j, 400, 60)
    assert np.abs(d.conj().T @ d - np.eye(60)).max() < 1e-10
    assert np.isclose(displacement_matrix_element(0, 0, 4.0j), np.exp(-8.0))
