"""Truncated Hilbert spaces and the elementary operators built on them.

Factor ordering is photon ⊗ spin everywhere. Inside a ``FullProduct``
spin space emitter 0 is the leftmost factor and each emitter uses the
basis (|e>, |g>), so sigma_z = diag(+1, -1). ``DickeJ`` spaces use the
Jz eigenbasis ordered m = +j, ..., -j.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma
from typing import Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FullProduct",
    "DickeJ",
    "Oscillator",
    "HilbertSpace",
    "SparseOperator",
    "DimensionError",
    "destroy_matrix",
    "spin_matrices",
    "pauli",
    "kron",
    "fock_destroy",
    "photon_operator",
    "spin_operator",
    "spin_ops",
    "single_spin_op",
    "laguerre",
    "displacement_matrix_element",
    "displacement_matrix",
]


class DimensionError(ValueError):
    """Raised when operator factors do not fit the target space."""


@dataclass(frozen=True)
class FullProduct:
    """Tensor product of ``n`` spins-1/2 (dimension 2**n)."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"FullProduct needs n >= 1, got {self.n!r}")

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def j_max(self) -> float:
        return self.n / 2


@dataclass(frozen=True)
class DickeJ:
    """Single angular-momentum multiplet of total spin ``j``."""

    j: float

    def __post_init__(self):
        two_j = 2 * self.j
        if two_j < 0 or abs(two_j - round(two_j)) > 1e-12:
            raise ValueError(f"DickeJ needs 2j to be a non-negative integer, got j={self.j!r}")
        object.__setattr__(self, "j", round(two_j) / 2)

    @property
    def dim(self) -> int:
        return int(round(2 * self.j)) + 1

    @property
    def j_max(self) -> float:
        return self.j


@dataclass(frozen=True)
class Oscillator:
    """Second bosonic mode truncated at ``cutoff`` quanta (Hopfield matter mode)."""

    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"Oscillator cutoff must be an integer >= 1, got {self.cutoff!r}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1


SpinRep = Union[FullProduct, DickeJ, Oscillator]


@dataclass(frozen=True)
class HilbertSpace:
    """Fock space truncated at ``fock_cutoff`` photons times a spin space."""

    fock_cutoff: int
    spin_rep: SpinRep

    def __post_init__(self):
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be an integer >= 1, got {self.fock_cutoff!r}")
        if not isinstance(self.spin_rep, (FullProduct, DickeJ, Oscillator)):
            raise TypeError("spin_rep must be FullProduct, DickeJ or Oscillator")

    @property
    def photon_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def spin_dim(self) -> int:
        return self.spin_rep.dim

    @property
    def total_dim(self) -> int:
        return self.photon_dim * self.spin_dim

    def with_cutoff(self, cutoff: int) -> "HilbertSpace":
        return HilbertSpace(cutoff, self.spin_rep)


class SparseOperator:
    """Complex CSR matrix tied to a :class:`HilbertSpace`.

    Supports ``+``, ``-``, scalar ``*``, ``@`` (with operators or state
    vectors) and :meth:`dag`. Entries are validated finite on
    construction; ``hermitian_hint=True`` additionally asserts
    max|M - M^dagger| < 1e-12.
    """

    __slots__ = ("space", "matrix", "hermitian_hint")

    def __init__(self, space: HilbertSpace, matrix, hermitian_hint: bool = False):
        m = sp.csr_matrix(matrix, dtype=complex)
        n = space.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match space dimension {n}")
        if not np.all(np.isfinite(m.data)):
            raise ValueError("operator has non-finite entries")
        m.sort_indices()
        self.space = space
        self.matrix = m
        self.hermitian_hint = bool(hermitian_hint)
        if hermitian_hint:
            res = self.hermiticity_residual()
            if res >= 1e-12:
                raise ValueError(f"operator flagged Hermitian but residual is {res:.3e}")

    def __repr__(self):
        return (f"SparseOperator(dim={self.space.total_dim}, nnz={self.matrix.nnz}, "
                f"hermitian={self.hermitian_hint})")

    def _check(self, other: "SparseOperator"):
        if other.space != self.space:
            raise DimensionError(f"space mismatch: {self.space} vs {other.space}")

    def __add__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.space, self.matrix + other.matrix,
                                  self.hermitian_hint and other.hermitian_hint)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.space, self.matrix - other.matrix,
                                  self.hermitian_hint and other.hermitian_hint)
        return NotImplemented

    def __neg__(self):
        return SparseOperator(self.space, -self.matrix, self.hermitian_hint)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            herm = self.hermitian_hint and np.isreal(scalar)
            return SparseOperator(self.space, self.matrix * scalar, herm)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.space, self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.space, self.matrix.conj().T, self.hermitian_hint)

    def commutator(self, other: "SparseOperator") -> "SparseOperator":
        return self @ other - other @ self

    def hermiticity_residual(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def max_abs(self) -> float:
        return float(abs(self.matrix).max()) if self.matrix.nnz else 0.0

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


# -- factor matrices ---------------------------------------------------------

def destroy_matrix(cutoff: int) -> sp.csr_matrix:
    """Annihilation operator on the Fock space {0, ..., cutoff}."""
    return sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1,
                    shape=(cutoff + 1, cutoff + 1), format="csr", dtype=complex)


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # basis (|e>, |g>): sigma^- = |g><e|
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
}


def pauli(which: str) -> sp.csr_matrix:
    try:
        return sp.csr_matrix(_PAULI[which])
    except KeyError:
        raise ValueError(f"unknown Pauli operator {which!r}") from None


def _site_operator(op: sp.csr_matrix, k: int, n: int) -> sp.csr_matrix:
    out = sp.identity(1, dtype=complex, format="csr")
    eye2 = sp.identity(2, dtype=complex, format="csr")
    for i in range(n):
        out = sp.kron(out, op if i == k else eye2, format="csr")
    return out


def spin_matrices(rep: SpinRep) -> dict[str, sp.csr_matrix]:
    """Collective spin matrices Jx, Jy, Jz, Jplus, Jminus on the spin factor."""
    if isinstance(rep, DickeJ):
        j = rep.j
        m = j - np.arange(rep.dim)
        # Jplus |j, m> = sqrt(j(j+1) - m(m+1)) |j, m+1>; index of m+1 is one lower
        up = np.sqrt(np.maximum(j * (j + 1) - m[1:] * (m[1:] + 1), 0.0))
        jp = sp.diags(up, 1, shape=(rep.dim, rep.dim), format="csr", dtype=complex)
        jz = sp.diags(m.astype(complex), 0, format="csr")
    elif isinstance(rep, FullProduct):
        n = rep.n
        jp = sum(_site_operator(pauli("plus"), k, n) for k in range(n))
        jz = 0.5 * sum(_site_operator(pauli("z"), k, n) for k in range(n))
        jp, jz = sp.csr_matrix(jp), sp.csr_matrix(jz)
    else:
        raise ValueError("spin operators are undefined on an Oscillator factor")
    jm = sp.csr_matrix(jp.conj().T)
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return {"Jx": sp.csr_matrix(jx), "Jy": sp.csr_matrix(jy), "Jz": jz,
            "Jplus": jp, "Jminus": jm}


# -- operators on the full space ---------------------------------------------

def kron(photon_factor, spin_factor, space: HilbertSpace,
         hermitian_hint: bool = False) -> SparseOperator:
    """Photon ⊗ spin Kronecker product, dimension-checked against ``space``."""
    a = sp.csr_matrix(photon_factor, dtype=complex)
    b = sp.csr_matrix(spin_factor, dtype=complex)
    if a.shape != (space.photon_dim, space.photon_dim):
        raise DimensionError(f"photon factor {a.shape} vs photon dimension {space.photon_dim}")
    if b.shape != (space.spin_dim, space.spin_dim):
        raise DimensionError(f"spin factor {b.shape} vs spin dimension {space.spin_dim}")
    return SparseOperator(space, sp.kron(a, b, format="csr"), hermitian_hint)


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=complex, format="csr")


def fock_destroy(space: HilbertSpace) -> SparseOperator:
    """Photon annihilation operator a ⊗ I_spin."""
    return kron(destroy_matrix(space.fock_cutoff), _eye(space.spin_dim), space)


def photon_operator(matrix, space: HilbertSpace, hermitian_hint: bool = False) -> SparseOperator:
    return kron(matrix, _eye(space.spin_dim), space, hermitian_hint)


def spin_operator(matrix, space: HilbertSpace, hermitian_hint: bool = False) -> SparseOperator:
    return kron(_eye(space.photon_dim), matrix, space, hermitian_hint)


def spin_ops(space: HilbertSpace) -> dict[str, SparseOperator]:
    """Collective spin operators tensored with the photon identity."""
    mats = spin_matrices(space.spin_rep)
    return {name: spin_operator(m, space, hermitian_hint=name in ("Jx", "Jy", "Jz"))
            for name, m in mats.items()}


def single_spin_op(space: HilbertSpace, k: int, which: str) -> SparseOperator:
    """Pauli or ladder operator acting on emitter ``k`` only.

    Only defined on ``FullProduct`` spaces.
    """
    rep = space.spin_rep
    if not isinstance(rep, FullProduct):
        raise ValueError("individual emitter operators need a FullProduct spin space")
    if not 0 <= k < rep.n:
        raise IndexError(f"emitter index {k} out of range for N={rep.n}")
    op = _site_operator(pauli(which), k, rep.n)
    return spin_operator(op, space, hermitian_hint=which in ("x", "y", "z"))


# -- special functions -------------------------------------------------------

def laguerre(n: int, x: float, alpha: float = 0.0) -> float:
    """Generalized Laguerre polynomial L_n^(alpha)(x) by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    prev, cur = 1.0, 1.0 + alpha - x
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def _log_abs(z: complex) -> float:
    return np.log(abs(z)) if z != 0 else -np.inf


def displacement_matrix_element(q: int, n: int, alpha: complex) -> complex:
    """<q|D(alpha)|n> with D(alpha) = exp(alpha a^dagger - alpha* a).

    Closed form through associated Laguerre polynomials; the factorial
    prefactor is combined in log space.
    """
    if q < 0 or n < 0:
        raise ValueError("Fock indices must be >= 0")
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    if x == 0.0:
        return complex(q == n)
    if q >= n:
        k, low, high, base = q - n, n, q, alpha
    else:
        k, low, high, base = n - q, q, n, -alpha.conjugate()
    lag = laguerre(low, x, k)
    if lag == 0.0:
        return 0j
    log_mag = 0.5 * (lgamma(low + 1) - lgamma(high + 1)) + k * np.log(abs(base)) - x / 2
    phase = (base / abs(base)) ** k
    return complex(phase * np.sign(lag) * np.exp(log_mag + np.log(abs(lag))))


def _laguerre_table(n_max: int, k: np.ndarray, x: float) -> tuple[np.ndarray, np.ndarray]:
    """L_n^(k)(x) for n = 0..n_max and every order in ``k``.

    Returns ``(mantissa, log_scale)`` with value = mantissa * exp(log_scale);
    the running rescale keeps large-x, large-n entries finite.
    """
    k = np.asarray(k, dtype=float)
    out = np.empty((n_max + 1, k.size))
    scale = np.zeros((n_max + 1, k.size))
    prev = np.ones_like(k)
    log_s = np.zeros_like(k)
    out[0], scale[0] = prev, log_s
    if n_max == 0:
        return out, scale
    cur = 1.0 + k - x
    out[1], scale[1] = cur, log_s
    for m in range(1, n_max):
        prev, cur = cur, ((2 * m + 1 + k - x) * cur - (m + k) * prev) / (m + 1)
        big = np.maximum(np.abs(cur), np.abs(prev))
        hot = big > 1e100
        if np.any(hot):
            f = big[hot]
            cur[hot] /= f
            prev[hot] /= f
            log_s = log_s.copy()
            log_s[hot] += np.log(f)
        out[m + 1], scale[m + 1] = cur, log_s
    return out, scale


def displacement_matrix(alpha: complex, rows: int, cols: int | None = None) -> np.ndarray:
    """Dense block <q|D(alpha)|n> for q < rows, n < cols of the untruncated operator."""
    cols = rows if cols is None else cols
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    out = np.zeros((rows, cols), dtype=complex)
    if x == 0.0:
        m = min(rows, cols)
        out[np.arange(m), np.arange(m)] = 1.0
        return out
    q = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    low = np.minimum(q, n)
    high = np.maximum(q, n)
    k = high - low
    k_max = int(k.max())
    table, log_scale = _laguerre_table(int(low.max()), np.arange(k_max + 1), x)
    lag = table[low, k]
    lag_scale = log_scale[low, k]
    lg = np.array([lgamma(i + 1) for i in range(max(rows, cols))])
    upper = q >= n
    log_base = np.log(abs(alpha))
    log_mag = 0.5 * (lg[low] - lg[high]) + k * log_base - x / 2 + lag_scale
    unit = alpha / abs(alpha)
    phase = np.where(upper, unit ** k, (-unit.conjugate()) ** k)
    with np.errstate(divide="ignore"):
        mag = np.where(lag != 0.0, np.exp(log_mag + np.log(np.abs(lag))), 0.0)
    out[:] = phase * np.sign(lag) * mag
    return out
