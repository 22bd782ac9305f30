"""Deep-strong-coupling perturbation theory around the displaced oscillator.

In the dipole gauge H_D = wc A^dag A + wa Jz with A = a + 2i eta Jx. The
unperturbed part wc A^dag A has the ladder n*wc, and in each Jx sector m
the oscillator is displaced by D(-2i eta m). The emitter term wa Jz is
treated as the perturbation; its matrix elements between displaced
states reduce to <q|D(+-2i eta)|n>, i.e. to <q|cos(2 eta X)|n> and
<q|sin(2 eta X)|n>.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .algebra import DickeJ, displacement_matrix, laguerre, spin_matrices
from .models import ModelParams
from .spectrum import degeneracy

__all__ = [
    "DscCorrection",
    "cos_matrix",
    "sin_matrix",
    "jz_in_jx_basis",
    "first_order",
    "second_order",
    "dsc_levels",
]


@dataclass
class DscCorrection:
    n: int
    j: float
    first_order: np.ndarray
    second_order: np.ndarray
    eta: float
    q_max: int = 0
    converged: bool = True


def cos_matrix(eta: float, rows: int, cols: int | None = None) -> np.ndarray:
    """<q|cos(2 eta X)|n> of the untruncated oscillator, X = a + a^dag."""
    plus = displacement_matrix(2j * eta, rows, cols)
    minus = displacement_matrix(-2j * eta, rows, cols)
    return (0.5 * (plus + minus)).real


def sin_matrix(eta: float, rows: int, cols: int | None = None) -> np.ndarray:
    """<q|sin(2 eta X)|n> of the untruncated oscillator."""
    plus = displacement_matrix(2j * eta, rows, cols)
    minus = displacement_matrix(-2j * eta, rows, cols)
    return ((plus - minus) / 2j).real


def jz_in_jx_basis(j: float):
    """Jz in the Jx eigenbasis ordered m = -j..j, together with the m values."""
    mats = spin_matrices(DickeJ(j))
    vals, vecs = np.linalg.eigh(mats["Jx"].toarray())
    # fix the phases so that Jz has real off-diagonal elements
    jz = vecs.conj().T @ mats["Jz"].toarray() @ vecs
    dim = len(vals)
    phase = np.ones(dim, dtype=complex)
    for k in range(1, dim):
        z = jz[k - 1, k] * phase[k - 1].conj()
        phase[k] = z / abs(z) if abs(z) > 1e-14 else 1.0
    jz = phase.conj()[:, None] * jz * phase[None, :]
    jz = vecs_fix = 0.5 * (jz + jz.conj().T)
    return np.round(vals * 2) / 2, vecs_fix.real


def _block_overlap(n: int, m_vals, eta: float, q_max: int, jz_x: np.ndarray) -> np.ndarray:
    """V_q = <q, m| Jz |n, m'> for q = 0..q_max, shape (q_max+1, dim, dim).

    Sector m has vacuum D(-2i eta m)|0>, so the overlap between sector
    oscillators is <q|D(-2i eta (m - m'))|n>.
    """
    dim = len(m_vals)
    out = np.zeros((q_max + 1, dim, dim), dtype=complex)
    cache = {}
    for a in range(dim):
        for b in range(dim):
            if abs(jz_x[a, b]) < 1e-14:
                continue
            dm = m_vals[a] - m_vals[b]
            if dm not in cache:
                cache[dm] = displacement_matrix(-2j * eta * dm, q_max + 1, n + 1)[:, n]
            out[:, a, b] = jz_x[a, b] * cache[dm]
    return out


def first_order(n: int, j: float, eta: float, omega_a: float = 1.0) -> np.ndarray:
    """First-order shifts of rung n in spin sector j, ascending.

    Eigenvalues of wa e^{-2 eta^2} L_n(4 eta^2) Jz within the (2j+1)-fold
    degenerate rung: wa e^{-2 eta^2} L_n(4 eta^2) * m for m = -j..j.
    """
    _, jz_x = jz_in_jx_basis(j)
    scale = omega_a * np.exp(-2 * eta**2) * laguerre(n, 4 * eta**2)
    return np.sort(np.linalg.eigvalsh(scale * jz_x))


def default_q_max(n: int, eta: float) -> int:
    return int(n + ceil(20 * eta**2) + 40)


def second_order(n: int, j: float, eta: float, omega_a: float = 1.0,
                 q_max: int | None = None, omega_c: float = 1.0) -> DscCorrection:
    """First- and second-order shifts of rung n in spin sector j.

    Degenerate perturbation theory on the (2j+1)-fold rung: the effective
    block

        W = wa P Jz P + wa^2 sum_{q != n} V_qn^dag V_qn / ((n - q) wc)

    is diagonalized, with V_qn the Jz block between rungs q and n.
    ``first_order`` holds the eigenvalues of the first term alone and
    ``second_order`` the difference between the sorted eigenvalues of W
    and that list. The sum is truncated at ``q_max`` and flagged
    unconverged if its last term exceeds 1e-12 of the largest entry.
    """
    q_max = default_q_max(n, eta) if q_max is None else int(q_max)
    if q_max <= n:
        raise ValueError("q_max must exceed n")
    m_vals, jz_x = jz_in_jx_basis(j)
    blocks = _block_overlap(n, m_vals, eta, q_max, jz_x)
    w1_mat = omega_a * blocks[n]
    w1 = np.linalg.eigvalsh(w1_mat)
    dim = len(m_vals)
    w2_mat = np.zeros((dim, dim), dtype=complex)
    last = np.zeros((dim, dim), dtype=complex)
    for q in range(q_max + 1):
        if q == n:
            continue
        amp = omega_a * blocks[q]
        last = amp.conj().T @ amp / ((n - q) * omega_c)
        w2_mat += last
    w2_mat = 0.5 * (w2_mat + w2_mat.conj().T)
    # the first-order splitting is exponentially small, so the effective
    # block is diagonalized as a whole rather than term by term
    total = np.linalg.eigvalsh(w1_mat + w2_mat)
    scale = max(np.abs(w2_mat).max(), 1e-300)
    converged = bool(np.abs(last).max() <= 1e-12 * scale)
    return DscCorrection(n, j, w1, total - w1, eta, q_max, converged)


def dsc_levels(params: ModelParams, n_max: int, order: int = 2) -> np.ndarray:
    """Approximate dipole-gauge spectrum from DSC perturbation theory.

    Levels n*wc + shifts(n, j) for every rung n <= n_max and every spin
    sector j with its multiplicity. Absolute energies, ascending.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if not params.identical:
        raise ValueError("DSC perturbation theory requires identical emitters")
    wa, wc, eta = params.omega_a[0], params.omega_c, params.eta
    if isinstance(params.spin_rep, DickeJ):
        sectors = [(params.spin_rep.j, 1)]
    else:
        N = params.n_emitters
        sectors = [(t / 2, degeneracy(N, t / 2)) for t in range(N % 2, N + 1, 2)]
    out = []
    for n in range(n_max + 1):
        for j, mult in sectors:
            dim = int(round(2 * j)) + 1
            if order == 0:
                shifts = np.zeros(dim)
            elif order == 1:
                shifts = first_order(n, j, eta, wa)
            else:
                c = second_order(n, j, eta, wa, omega_c=wc)
                shifts = c.first_order + c.second_order
            out.extend(np.repeat(n * wc + shifts, mult))
    return np.sort(np.asarray(out))
