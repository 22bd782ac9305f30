"""Dressed-basis generalized master equation for cavity and emitter baths.

All superoperators act on row-major vectorized density matrices,
vec[a*d + b] = rho[a, b], so that vec(A rho B) = (A kron B^T) vec(rho).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .algebra import DickeJ, FullProduct, SparseOperator, single_spin_op, spin_ops
from .models import ModelParams, dressed_photon_destroy
from .algebra import fock_destroy

log = logging.getLogger(__name__)

__all__ = [
    "BathChannel",
    "FilterSpec",
    "DressedJumpSet",
    "GmeLiouvillian",
    "DensityOperator",
    "KernelDimensionError",
    "thermal_occupation",
    "ohmic_rates",
    "dephasing_rate",
    "default_channels",
    "coupling_operator",
    "choose_d_keep",
    "dressed_jumps",
    "build_gme",
    "secular_lindbladian",
    "steady_state",
    "evolve",
    "trace_functional",
]

DEG_TOL = 1e-9


@dataclass(frozen=True)
class BathChannel:
    """One Markovian reservoir.

    Parameters
    ----------
    kind : {"cavity", "collective", "individual"}
    gamma : float
        Bare rate in units of omega_c.
    temperature : float
        Normalized temperature T / omega_c.
    f : float, optional
        Reference frequency of the subsystem; defaults to omega_c for the
        cavity and to the emitter frequency otherwise.
    site : int, optional
        Emitter index for ``kind="individual"``.
    cavity_operator : {"a", "a_D"}
        Cavity coupling operator in the gauge of the Hamiltonian.
    """

    kind: str
    gamma: float
    temperature: float = 0.0
    f: Optional[float] = None
    site: Optional[int] = None
    cavity_operator: str = "a"

    def __post_init__(self):
        if self.kind not in ("cavity", "collective", "individual"):
            raise ValueError(f"unknown bath kind {self.kind!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.f is not None and self.f <= 0:
            raise ValueError("reference frequency f must be > 0")
        if self.kind == "individual" and self.site is None:
            raise ValueError("individual channels need a site index")
        if self.cavity_operator not in ("a", "a_D"):
            raise ValueError("cavity_operator must be 'a' or 'a_D'")

    def reference(self, params: ModelParams) -> float:
        if self.f is not None:
            return self.f
        if self.kind == "cavity":
            return params.omega_c
        if self.kind == "individual":
            return params.omega_a[self.site]
        return float(np.mean(params.omega_a))

    def label(self) -> str:
        return f"individual[{self.site}]" if self.kind == "individual" else self.kind


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian filter F = exp(-(w - w')^2 / (2 delta_f^2)).

    ``delta_f=None`` means 100 times the largest channel rate. Pairs closer
    than ``deg_tol`` always get F = 1; pairs further than
    ``n_sigma * delta_f`` are skipped.
    """

    delta_f: Optional[float] = None
    deg_tol: float = DEG_TOL
    n_sigma: float = 8.0

    def resolve(self, gammas) -> float:
        if self.delta_f is not None:
            return float(self.delta_f)
        return 100.0 * float(max(gammas, default=0.0))


def thermal_occupation(omega, temperature: float):
    """Bose factor 1/(exp(w/T) - 1), identically zero at T = 0."""
    omega = np.asarray(omega, dtype=float)
    if temperature <= 0:
        return np.zeros_like(omega)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(omega / temperature)


def ohmic_rates(channel: BathChannel, omega, params: Optional[ModelParams] = None):
    """Gamma(w) = gamma * w / f."""
    f = channel.f if params is None else channel.reference(params)
    if f is None:
        raise ValueError("reference frequency unknown; pass params or set f")
    return channel.gamma * np.asarray(omega, dtype=float) / f


def dephasing_rate(channel: BathChannel, params: Optional[ModelParams] = None) -> float:
    """Omega = gamma * T / (4 f)."""
    f = channel.f if params is None else channel.reference(params)
    if f is None:
        raise ValueError("reference frequency unknown; pass params or set f")
    return channel.gamma * channel.temperature / (4.0 * f)


def default_channels(params: ModelParams, emitters: str = "individual", gamma: float = 1e-3,
                     t_emitters: float = 0.15, t_cavity: float = 0.0,
                     halve_mixed: bool = True) -> list:
    """Cavity bath plus collective and/or individual emitter baths.

    With both emitter bath types present, their rates are halved.
    """
    if emitters not in ("individual", "collective", "both", "none"):
        raise ValueError(f"unknown emitter bath choice {emitters!r}")
    out = [BathChannel("cavity", gamma, t_cavity)]
    g_em = gamma / 2 if (emitters == "both" and halve_mixed) else gamma
    if emitters in ("collective", "both"):
        out.append(BathChannel("collective", g_em, t_emitters))
    if emitters in ("individual", "both"):
        out.extend(BathChannel("individual", g_em, t_emitters, site=k)
                   for k in range(params.n_emitters))
    return out


def coupling_operator(channel: BathChannel, params: ModelParams, space) -> SparseOperator:
    """System operator s of a channel: a (or a_D), sum_k sigma_k^-/sqrt(N), or sigma_k^-."""
    if channel.kind == "cavity":
        if channel.cavity_operator == "a_D":
            return dressed_photon_destroy(params, space)
        return fock_destroy(space)
    if channel.kind == "collective":
        jm = spin_ops(space)["Jminus"]
        return jm * (1.0 / np.sqrt(params.n_emitters))
    if not isinstance(params.spin_rep, FullProduct):
        raise ValueError("individual emitter channels need a FullProduct spin space")
    return single_spin_op(space, channel.site, "minus")


def choose_d_keep(energies: np.ndarray, window: float = 6.0, deg_tol: float = DEG_TOL) -> int:
    """Number of levels with E - E0 < window, never splitting a degenerate cluster."""
    e = np.asarray(energies) - energies[0]
    d = int(np.searchsorted(e, window, side="left"))
    while 0 < d < len(e) and e[d] - e[d - 1] < deg_tol:
        d += 1
    return max(d, 1)


@dataclass
class DressedJumpSet:
    """Frequency components of (s + s^dag) in the retained eigenbasis.

    Transition t lowers level ``high[t]`` to ``low[t]`` at frequency
    ``omega[t]`` with amplitude ``amp[t] = <low|s+s^dag|high>``, so
    S+(w) = sum_{omega_t = w} amp_t |low_t><high_t|. ``s_zero`` holds the
    elements between degenerate levels.
    """

    x: np.ndarray
    omega: np.ndarray
    low: np.ndarray
    high: np.ndarray
    amp: np.ndarray
    s_zero: np.ndarray

    def s_plus(self) -> np.ndarray:
        d = self.x.shape[0]
        out = np.zeros((d, d), dtype=complex)
        out[self.low, self.high] = self.amp
        return out

    def s_minus(self) -> np.ndarray:
        return self.s_plus().conj().T

    def reconstruct(self) -> np.ndarray:
        return self.s_plus() + self.s_minus() + self.s_zero


def dressed_jumps(eig, op: SparseOperator, d_keep: int, deg_tol: float = DEG_TOL,
                  amp_tol: float = 1e-14) -> DressedJumpSet:
    """Bin <e|s + s^dag|e'> by transition frequency in the eigenbasis."""
    v = eig.states[:, :d_keep]
    e = np.asarray(eig.energies[:d_keep])
    m = op.matrix
    x = v.conj().T @ ((m + m.conj().T) @ v)
    x = 0.5 * (x + x.conj().T)
    dw = e[None, :] - e[:, None]  # dw[i, j] = E_j - E_i
    degenerate = np.abs(dw) < deg_tol
    s_zero = np.where(degenerate, x, 0.0)
    scale = np.abs(x).max() if x.size else 0.0
    lo, hi = np.nonzero((dw >= deg_tol) & (np.abs(x) > amp_tol * max(scale, 1e-300)))
    omega = dw[lo, hi]
    order = np.argsort(omega, kind="stable")
    return DressedJumpSet(x, omega[order], lo[order].astype(np.int64), hi[order].astype(np.int64),
                          x[lo, hi][order].astype(complex), s_zero)


@dataclass
class GmeLiouvillian:
    matrix: sp.csr_matrix
    energies: np.ndarray
    d: int
    channels: list
    jumps: list
    delta_f: float
    deg_tol: float
    gammas: list = field(default_factory=list)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(rho).reshape(-1)).reshape(self.d, self.d)


def trace_functional(d: int) -> np.ndarray:
    """Row vector t with t . vec(rho) = Tr rho."""
    t = np.zeros(d * d)
    t[np.arange(d) * (d + 1)] = 1.0
    return t


def _one_sided(k: np.ndarray) -> sp.csr_matrix:
    """vec(K rho + rho K^dag) as a sparse superoperator."""
    d = k.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    ks = sp.csr_matrix(k)
    return sp.kron(ks, eye, format="csr") + sp.kron(eye, ks.conj(), format="csr")


def _channel_superop(jumps: DressedJumpSet, absorb, emit, omega_deph, d, delta_f, deg_tol,
                     n_sigma, backend=None) -> sp.csr_matrix:
    kernel = backend or _kernels.gme_pairs
    # exact degeneracies always pass, however narrow the filter
    window = max(n_sigma * delta_f, deg_tol)
    rows, cols, vals, kmat, gmat = kernel(
        np.ascontiguousarray(jumps.omega, dtype=float),
        np.ascontiguousarray(jumps.low, dtype=np.int64),
        np.ascontiguousarray(jumps.high, dtype=np.int64),
        np.ascontiguousarray(jumps.amp, dtype=complex),
        np.ascontiguousarray(absorb, dtype=float),
        np.ascontiguousarray(emit, dtype=float),
        d, float(delta_f), float(window), float(deg_tol))
    out = sp.csr_matrix((vals, (rows, cols)), shape=(d * d, d * d))
    out = out - 0.5 * _one_sided(kmat) - 0.5 * _one_sided(gmat)
    if omega_deph > 0 and np.any(jumps.s_zero):
        s0 = sp.csr_matrix(jumps.s_zero)
        s02 = s0 @ s0
        eye = sp.identity(d, dtype=complex, format="csr")
        deph = 2 * sp.kron(s0, s0.T) - sp.kron(s02, eye) - sp.kron(eye, s02.T)
        out = out + omega_deph * deph
    return sp.csr_matrix(out)


def build_gme(eig, channels: Sequence, d_keep: int, params: ModelParams,
              filt: FilterSpec = FilterSpec(), operators: Optional[Sequence] = None,
              backend=None) -> GmeLiouvillian:
    """Assemble the dressed master equation on the lowest ``d_keep`` levels.

    Per channel, every pair of positive transition frequencies (w, w')
    inside the filter window contributes the absorption and emission
    sandwich terms and the matching anticommutator terms, weighted by
    F(w, w') and the Ohmic thermal rates

        A(w) = Gamma(w) n(w),   B(w) = Gamma(w) (n(w) + 1).

    Zero-frequency components add pure dephasing with rate gamma T/(4 f).
    Counter-rotating pair terms and cross terms between S0 and S+- are not
    generated.
    """
    d = int(d_keep)
    if d > len(eig.energies):
        raise ValueError("d_keep exceeds the number of available eigenpairs")
    space = eig.space
    if space is None:
        raise ValueError("eigensolution carries no Hilbert space")
    e = np.asarray(eig.energies[:d], dtype=float)
    gammas = [c.gamma for c in channels]
    delta_f = filt.resolve(gammas)
    ops = operators or [coupling_operator(c, params, space) for c in channels]
    if len(ops) != len(channels):
        raise ValueError("one coupling operator per channel is required")
    ham = sp.diags((-1j * (e[:, None] - e[None, :])).ravel(), format="csr")
    total = ham
    jumps_all = []
    for ch, op in zip(channels, ops):
        if op.space != space:
            raise ValueError("channel operator and eigensolution live on different spaces")
        jumps = dressed_jumps(eig, op, d, filt.deg_tol)
        jumps_all.append(jumps)
        if ch.gamma == 0:
            continue
        f = ch.reference(params)
        rate = ch.gamma * jumps.omega / f
        n_th = thermal_occupation(jumps.omega, ch.temperature)
        total = total + _channel_superop(jumps, rate * n_th, rate * (n_th + 1.0),
                                         ch.gamma * ch.temperature / (4.0 * f), d, delta_f,
                                         filt.deg_tol, filt.n_sigma, backend)
    mat = sp.csr_matrix(total)
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return GmeLiouvillian(mat, e, d, list(channels), jumps_all, delta_f, filt.deg_tol, gammas)


def secular_lindbladian(e: np.ndarray, jump_ops: Sequence, rates: Sequence) -> sp.csr_matrix:
    """Reference Lindbladian sum_k rate_k D[L_k] plus the Hamiltonian part (dense inputs)."""
    d = len(e)
    eye = np.eye(d)
    out = np.diag((-1j * (e[:, None] - e[None, :])).ravel())
    for op, r in zip(jump_ops, rates):
        ld = op.conj().T @ op
        out = out + r * (np.kron(op, op.conj()) - 0.5 * np.kron(ld, eye) - 0.5 * np.kron(eye, ld.T))
    return sp.csr_matrix(out)


# -- density operators ---------------------------------------------------------

@dataclass
class DensityOperator:
    """Density matrix in the retained eigenbasis."""

    matrix: np.ndarray

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.matrix))

    def check(self, tol: float = 1e-9) -> None:
        if abs(self.trace() - 1) >= tol:
            raise ValueError(f"trace deviates from 1 by {abs(self.trace() - 1):.2e}")
        if self.min_eigenvalue() <= -tol:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue():.2e}")

    def vec(self) -> np.ndarray:
        return self.matrix.reshape(-1)


class KernelDimensionError(RuntimeError):
    """The Liouvillian kernel is not one-dimensional."""

    def __init__(self, dim: int, singular_values):
        self.dim = dim
        self.singular_values = np.asarray(singular_values)
        super().__init__(f"Liouvillian kernel has dimension {dim}; "
                         f"smallest singular values {self.singular_values[:6]}")


DENSE_KERNEL_LIMIT = 2500


def _kernel_tol(L: GmeLiouvillian) -> float:
    g = [x for x in L.gammas if x > 0]
    return 1e-9 * min(g) if g else 1e-12


def steady_state(L: GmeLiouvillian, initial: Optional[np.ndarray] = None,
                 kernel_tol: Optional[float] = None,
                 dense_limit: int = DENSE_KERNEL_LIMIT) -> DensityOperator:
    """Stationary state of the master equation.

    The kernel dimension is checked first. A kernel of dimension other than
    one raises :class:`KernelDimensionError` unless ``initial`` is given,
    in which case the asymptotic state reached from ``initial`` is
    returned: R (U^dag R)^{-1} U^dag vec(rho0) with R and U spanning the
    right and left kernels.
    """
    d = L.d
    n = d * d
    tol = _kernel_tol(L) if kernel_tol is None else kernel_tol
    if n <= dense_limit:
        u, s, vh = np.linalg.svd(L.matrix.toarray())
        null = s < tol
        dim = int(null.sum())
        small = s[::-1][:6]
        right = vh.conj().T[:, null]
        left = u[:, null]
    else:
        vals, vecs = spla.eigs(L.matrix.tocsc(), k=4, sigma=-0.1 * tol, which="LM",
                               v0=np.ones(n, dtype=complex))
        order = np.argsort(np.abs(vals))
        vals, vecs = vals[order], vecs[:, order]
        null = np.abs(vals) < tol
        dim = int(null.sum())
        small = np.abs(vals)
        right = vecs[:, null]
        left = None
        if dim > 1 or initial is not None:
            lv, lvecs = spla.eigs(L.matrix.conj().T.tocsc(), k=4, sigma=-0.1 * tol, which="LM",
                                  v0=np.ones(n, dtype=complex))
            left = lvecs[:, np.abs(lv) < tol]
    if dim == 0:
        raise KernelDimensionError(0, small)
    if dim == 1:
        vec = right[:, 0]
    else:
        if initial is None:
            raise KernelDimensionError(dim, small)
        rho0 = np.asarray(initial.matrix if isinstance(initial, DensityOperator) else initial)
        proj = right @ np.linalg.solve(left.conj().T @ right, left.conj().T @ rho0.reshape(-1))
        vec = proj
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    resid = float(np.abs(L.matrix @ rho.reshape(-1)).max())
    if resid > 1e-10:
        log.warning("steady-state residual %.2e", resid)
    out = DensityOperator(rho)
    out.residual = resid
    out.kernel_dim = dim
    return out


def evolve(L: GmeLiouvillian, rho0, t_grid, trace_tol: float = 1e-8) -> list:
    """rho(t) = exp(L t) rho0 on an ascending time grid (Krylov action)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending")
    rho0 = np.asarray(rho0.matrix if isinstance(rho0, DensityOperator) else rho0, dtype=complex)
    d = rho0.shape[0]
    v = rho0.reshape(-1)
    t_prev = 0.0
    out = []
    tr0 = np.trace(rho0)
    mat = L.matrix.tocsr()
    for t in t_grid:
        dt = t - t_prev
        if dt > 0:
            v = spla.expm_multiply(mat * dt, v)
        t_prev = t
        rho = v.reshape(d, d)
        if abs(np.trace(rho) - tr0) > trace_tol:
            raise RuntimeError(f"trace drifted by {abs(np.trace(rho) - tr0):.2e} at t={t}")
        out.append(DensityOperator(rho.copy()))
    return out
