"""Light-matter Hamiltonians: dipole and Coulomb gauge, TC and Hopfield limits.

The collective coupling ``lam`` is normalised as lam = eta * sqrt(N), where
eta is the per-emitter coupling. The Hamiltonians are written in terms of
eta, so a single emitter sees eta = lam.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .algebra import (
    DickeJ,
    FullProduct,
    HilbertSpace,
    Oscillator,
    SparseOperator,
    destroy_matrix,
    displacement_matrix,
    fock_destroy,
    pauli,
    spin_matrices,
    spin_operator,
    _site_operator,
)

__all__ = [
    "ModelParams",
    "HopfieldParams",
    "build_hamiltonian",
    "build_dipole_gauge",
    "build_coulomb_gauge",
    "build_tavis_cummings",
    "build_hopfield",
    "gauge_transform",
    "unitarity_residual",
    "dressed_photon_destroy",
    "excitation_number",
    "parity_operator",
    "quadrature_function",
]

GAUGES = ("dipole", "coulomb")


def _norm_gauge(g: str) -> str:
    g = str(g).lower()
    if g not in GAUGES:
        raise ValueError(f"unknown gauge {g!r}; expected one of {GAUGES}")
    return g


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the generalized Dicke model.

    Parameters
    ----------
    n_emitters : int
        Number of two-level emitters N.
    omega_a : float or sequence of float
        Emitter frequencies in units of omega_c. A scalar is broadcast.
    lam : float
        Collective normalized coupling lam = g sqrt(N) / omega_c.
    omega_c : float
        Cavity frequency, 1.0 in engine units.
    include_p2 : bool
        Keep the self-polarization term of the dipole gauge.
    gauge : {"dipole", "coulomb"}
    spin_rep : FullProduct or DickeJ, optional
        Defaults to ``FullProduct(n_emitters)``.
    """

    n_emitters: int
    omega_a: tuple = (1.0,)
    lam: float = 0.0
    omega_c: float = 1.0
    include_p2: bool = True
    gauge: str = "dipole"
    spin_rep: Optional[object] = None

    def __post_init__(self):
        n = self.n_emitters
        if int(n) != n or n < 1:
            raise ValueError(f"n_emitters must be an integer >= 1, got {n!r}")
        wa = np.atleast_1d(np.asarray(self.omega_a, dtype=float))
        if wa.size == 1:
            wa = np.repeat(wa, n)
        if wa.size != n:
            raise ValueError(f"omega_a has {wa.size} entries for {n} emitters")
        if np.any(wa <= 0) or self.omega_c <= 0:
            raise ValueError("all frequencies must be positive")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        object.__setattr__(self, "omega_a", tuple(float(w) for w in wa))
        object.__setattr__(self, "gauge", _norm_gauge(self.gauge))
        rep = self.spin_rep
        if rep is None:
            rep = FullProduct(n)
            object.__setattr__(self, "spin_rep", rep)
        if isinstance(rep, FullProduct):
            if rep.n != n:
                raise ValueError(f"FullProduct({rep.n}) does not match n_emitters={n}")
        elif isinstance(rep, DickeJ):
            if not self.identical:
                raise ValueError("DickeJ representation requires identical emitters")
            if rep.j > n / 2 or abs((n / 2 - rep.j) - round(n / 2 - rep.j)) > 1e-12:
                raise ValueError(f"j={rep.j} is not a valid total spin for N={n}")
        else:
            raise TypeError("spin_rep must be FullProduct or DickeJ")

    @property
    def identical(self) -> bool:
        return float(np.ptp(self.omega_a)) == 0.0

    @property
    def eta(self) -> float:
        """Per-emitter coupling lam / sqrt(N)."""
        return self.lam / np.sqrt(self.n_emitters)

    @property
    def j_max(self) -> float:
        return self.spin_rep.j_max

    def with_lambda(self, lam: float) -> "ModelParams":
        return replace(self, lam=float(lam))

    def space(self, cutoff: int) -> HilbertSpace:
        return HilbertSpace(int(cutoff), self.spin_rep)

    def check_space(self, space: HilbertSpace):
        if space.spin_rep != self.spin_rep:
            raise ValueError(f"space spin representation {space.spin_rep} does not match {self.spin_rep}")


@dataclass(frozen=True)
class HopfieldParams:
    """Two coupled bosonic modes: cavity ``a`` and collective matter mode ``b``."""

    omega_c: float = 1.0
    omega_a: float = 1.0
    lam: float = 0.0
    gauge: str = "dipole"
    cutoff_a: int = 20
    cutoff_b: int = 20

    def __post_init__(self):
        if self.omega_c <= 0 or self.omega_a <= 0:
            raise ValueError("frequencies must be positive")
        if self.cutoff_a < 1 or self.cutoff_b < 1:
            raise ValueError("cutoffs must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        object.__setattr__(self, "gauge", _norm_gauge(self.gauge))

    def space(self) -> HilbertSpace:
        return HilbertSpace(self.cutoff_a, Oscillator(self.cutoff_b))


# -- spin-side building blocks -----------------------------------------------

def _spin_pieces(params: ModelParams):
    """Return (Sx, Sy, Sz_omega, Sy_omega) on the spin factor.

    Sx = sum_i sigma_x^(i) = 2 Jx; the *_omega sums carry omega_a^(i)/2.
    """
    rep = params.spin_rep
    if isinstance(rep, DickeJ):
        m = spin_matrices(rep)
        w = params.omega_a[0]
        return 2 * m["Jx"], 2 * m["Jy"], w * m["Jz"], w * m["Jy"]
    n = rep.n
    sx = sum(_site_operator(pauli("x"), k, n) for k in range(n))
    sy = sum(_site_operator(pauli("y"), k, n) for k in range(n))
    wz = sum(0.5 * params.omega_a[k] * _site_operator(pauli("z"), k, n) for k in range(n))
    wy = sum(0.5 * params.omega_a[k] * _site_operator(pauli("y"), k, n) for k in range(n))
    return tuple(sp.csr_matrix(x) for x in (sx, sy, wz, wy))


def _photon_eye(space):
    return sp.identity(space.photon_dim, dtype=complex, format="csr")


def _spin_eye(space):
    return sp.identity(space.spin_dim, dtype=complex, format="csr")


def _hermitize(m):
    return 0.5 * (m + m.conj().T)


def build_dipole_gauge(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """Dipole-gauge Hamiltonian.

    H_D = wc a^dag a + sum_i wa_i sz_i / 2 - i eta wc (a - a^dag) Sx + eta^2 wc Sx^2,
    with Sx = sum_i sx_i. ``include_p2=False`` drops the last term.
    """
    params.check_space(space)
    sx, _, wz, _ = _spin_pieces(params)
    a = destroy_matrix(space.fock_cutoff)
    ad = a.conj().T
    eta, wc = params.eta, params.omega_c
    h = sp.kron(wc * (ad @ a), _spin_eye(space))
    h = h + sp.kron(_photon_eye(space), wz)
    h = h + sp.kron(-1j * eta * wc * (a - ad), sx)
    if params.include_p2:
        h = h + sp.kron(_photon_eye(space), eta**2 * wc * (sx @ sx))
    return SparseOperator(space, _hermitize(sp.csr_matrix(h)), hermitian_hint=True)


def quadrature_function(cutoff: int, func) -> np.ndarray:
    """f(a + a^dag) on Fock space {0..cutoff}, by spectral calculus of the truncated X."""
    a = destroy_matrix(cutoff).toarray()
    x = (a + a.conj().T).real
    vals, vecs = np.linalg.eigh(x)
    out = (vecs * func(vals)) @ vecs.T
    return 0.5 * (out + out.T)


def build_coulomb_gauge(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """Coulomb-gauge Hamiltonian.

    H_C = wc a^dag a + sum_i (wa_i/2) [sz_i cos(2 eta X) + sy_i sin(2 eta X)].
    The operator cosine and sine act on the truncated quadrature X = a + a^dag.
    """
    params.check_space(space)
    _, _, wz, wy = _spin_pieces(params)
    eta = params.eta
    cos_x = quadrature_function(space.fock_cutoff, lambda x: np.cos(2 * eta * x))
    sin_x = quadrature_function(space.fock_cutoff, lambda x: np.sin(2 * eta * x))
    # drop spectral-calculus round-off so sparsity survives at small eta
    cos_x[np.abs(cos_x) < 1e-15] = 0.0
    sin_x[np.abs(sin_x) < 1e-15] = 0.0
    a = destroy_matrix(space.fock_cutoff)
    h = sp.kron(params.omega_c * (a.conj().T @ a), _spin_eye(space))
    h = h + sp.kron(sp.csr_matrix(cos_x), wz) + sp.kron(sp.csr_matrix(sin_x), wy)
    return SparseOperator(space, _hermitize(sp.csr_matrix(h)), hermitian_hint=True)


def build_hamiltonian(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    if params.gauge == "coulomb":
        return build_coulomb_gauge(params, space)
    return build_dipole_gauge(params, space)


def build_tavis_cummings(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """Rotating-wave part of the dipole-gauge Hamiltonian.

    H_TC = wc a^dag a + sum_i wa_i sz_i / 2 + i eta wc (J- a^dag - J+ a).
    For N = 1 this is the JC model with vacuum Rabi splitting 2 lam wc.
    """
    params.check_space(space)
    if not params.identical:
        raise ValueError("Tavis-Cummings model requires identical emitters")
    mats = spin_matrices(params.spin_rep)
    _, _, wz, _ = _spin_pieces(params)
    a = destroy_matrix(space.fock_cutoff)
    ad = a.conj().T
    g = params.eta * params.omega_c
    h = sp.kron(params.omega_c * (ad @ a), _spin_eye(space)) + sp.kron(_photon_eye(space), wz)
    h = h + 1j * g * (sp.kron(ad, mats["Jminus"]) - sp.kron(a, mats["Jplus"]))
    return SparseOperator(space, _hermitize(sp.csr_matrix(h)), hermitian_hint=True)


def _spin_jx(params: ModelParams) -> np.ndarray:
    return spin_matrices(params.spin_rep)["Jx"].toarray()


def gauge_transform(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """T = exp(-2i eta Jx X) restricted to the working cutoff.

    In the Jx eigenbasis T acts as the displacement D(-2i eta m) on the
    photon, so the block is built from exact displacement matrix
    elements. T is then unitary only up to truncation; see
    :func:`unitarity_residual`.
    """
    params.check_space(space)
    vals, vecs = np.linalg.eigh(_spin_jx(params))
    vals = np.round(vals * 2) / 2
    out = sp.csr_matrix((space.total_dim, space.total_dim), dtype=complex)
    for m in np.unique(vals):
        v = vecs[:, np.isclose(vals, m)]
        proj = v @ v.conj().T
        proj[np.abs(proj) < 1e-14] = 0.0
        disp = displacement_matrix(-2j * params.eta * m, space.photon_dim)
        disp[np.abs(disp) < 1e-300] = 0.0
        out = out + sp.kron(sp.csr_matrix(disp), sp.csr_matrix(proj), format="csr")
    return SparseOperator(space, out)


def unitarity_residual(op: SparseOperator, n_check: Optional[int] = None) -> float:
    """max |T^dag T - I| over basis states with at most ``n_check`` photons.

    The top Fock rows of a truncated unitary always leak, so the default
    checks the lower half of the photon ladder, where truncation error is
    meaningful and shrinks as the cutoff grows.
    """
    space = op.space
    n_check = space.fock_cutoff // 2 if n_check is None else int(n_check)
    keep = (n_check + 1) * space.spin_dim
    prod = (op.matrix.conj().T @ op.matrix[:, :keep]).toarray()[:keep]
    return float(np.abs(prod - np.eye(keep)).max())


def dressed_photon_destroy(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """Gauge-transformed photon operator a_D = T a T^dag = a + 2i eta Jx."""
    params.check_space(space)
    jx = spin_operator(spin_matrices(params.spin_rep)["Jx"], space)
    return fock_destroy(space) + (2j * params.eta) * jx


def excitation_number(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """C = a^dag a + sum_i (sz_i + 1)/2 = a^dag a + Jz + N/2."""
    params.check_space(space)
    a = destroy_matrix(space.fock_cutoff)
    jz = spin_matrices(params.spin_rep)["Jz"]
    spin = jz + 0.5 * params.n_emitters * _spin_eye(space)
    return SparseOperator(space, sp.kron(a.conj().T @ a, _spin_eye(space))
                          + sp.kron(_photon_eye(space), spin), hermitian_hint=True)


def parity_operator(params: ModelParams, space: HilbertSpace) -> SparseOperator:
    """exp(i pi C), the Z2 symmetry of the full model."""
    c = excitation_number(params, space).matrix.diagonal().real
    return SparseOperator(space, sp.diags(np.where(np.round(c) % 2 == 0, 1.0, -1.0) + 0j,
                                          format="csr"), hermitian_hint=True)


def build_hopfield(params: HopfieldParams) -> SparseOperator:
    """Hopfield Hamiltonian of the cavity mode ``a`` and the matter mode ``b``.

    Dipole gauge:
        wc a^dag a + wa b^dag b + i wc lam (a^dag - a)(b + b^dag) + wc lam^2 (b + b^dag)^2
    Coulomb gauge:
        wc a^dag a + wa b^dag b - i wa lam (b^dag - b)(a + a^dag) + wa lam^2 (a + a^dag)^2
    The two are unitarily equivalent for any detuning.
    """
    space = params.space()
    a = destroy_matrix(params.cutoff_a)
    b = destroy_matrix(params.cutoff_b)
    ad, bd = a.conj().T, b.conj().T
    ia = sp.identity(a.shape[0], dtype=complex, format="csr")
    ib = sp.identity(b.shape[0], dtype=complex, format="csr")
    wc, wa, lam = params.omega_c, params.omega_a, params.lam
    h = sp.kron(wc * (ad @ a), ib) + sp.kron(ia, wa * (bd @ b))
    if params.gauge == "dipole":
        xb = b + bd
        h = h + 1j * wc * lam * sp.kron(ad - a, xb) + sp.kron(ia, wc * lam**2 * (xb @ xb))
    else:
        xa = a + ad
        h = h - 1j * wa * lam * sp.kron(xa, bd - b) + sp.kron(wa * lam**2 * (xa @ xa), ib)
    return SparseOperator(space, _hermitize(sp.csr_matrix(h)), hermitian_hint=True)
