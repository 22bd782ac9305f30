"""Output field operators, photon emission rate and QRT emission spectra."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.signal import find_peaks

from .algebra import fock_destroy
from .models import ModelParams, dressed_photon_destroy
from .open_system import (DEG_TOL, DensityOperator, FilterSpec, GmeLiouvillian, KernelDimensionError,
                          build_gme, choose_d_keep, default_channels, steady_state)
from .spectrum import EigenSolution, adaptive_solve

log = logging.getLogger(__name__)

__all__ = [
    "FieldOperators",
    "SpectrumResult",
    "EmissionSetup",
    "OpenSystemPoint",
    "field_ops",
    "emission_rate",
    "qrt_spectrum",
    "correlation_fft",
    "solve_open_system",
    "spectrum_at",
    "spectrum_map",
    "find_spectral_peaks",
    "transition_frequencies",
]

CLIP = -1e-10


@dataclass
class FieldOperators:
    """E+ and E- = (E+)^dag in the retained eigenbasis.

    E+ has nonzero entries only at (j, k) with E_k > E_j, so with ascending
    energies it is strictly upper-triangular as an array.
    """

    e_plus: np.ndarray
    construction: str
    gauge: str

    @property
    def e_minus(self) -> np.ndarray:
        return self.e_plus.conj().T

    @property
    def d(self) -> int:
        return self.e_plus.shape[0]


def field_ops(eig: EigenSolution, params: ModelParams, construction: str = "direct",
              d_keep: Optional[int] = None, deg_tol: float = DEG_TOL) -> FieldOperators:
    """Positive-frequency electric field in the eigenbasis.

    ``direct``: E+ = i sum_{k>j} <j|(a_D - a_D^dag)|k> |j><k|.
    ``trk``:    E+ = i sum_{k>j} (w_kj / wc) <j|(a_D + a_D^dag)|k> |j><k|.

    In the dipole gauge a_D = a + 2i eta Jx; in the Coulomb gauge the bare
    a already carries the field.
    """
    if construction not in ("direct", "trk"):
        raise ValueError(f"unknown field construction {construction!r}")
    if not eig.converged:
        raise ValueError("field operators need a converged eigensolution")
    d = len(eig.energies) if d_keep is None else int(d_keep)
    space = eig.space
    a = dressed_photon_destroy(params, space) if params.gauge == "dipole" else fock_destroy(space)
    v = eig.states[:, :d]
    e = np.asarray(eig.energies[:d])
    am = a.matrix
    if construction == "direct":
        m = 1j * (v.conj().T @ ((am - am.conj().T) @ v))
    else:
        m = 1j * (v.conj().T @ ((am + am.conj().T) @ v))
        m = m * (e[None, :] - e[:, None]) / params.omega_c
    upward = (e[None, :] - e[:, None]) > deg_tol
    return FieldOperators(np.where(upward, m, 0.0), construction, params.gauge)


def emission_rate(rho, fields: FieldOperators) -> float:
    """W = Tr(E- E+ rho), real part."""
    r = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    w = np.trace(fields.e_minus @ fields.e_plus @ r)
    return float(w.real)


@dataclass
class SpectrumResult:
    omega_grid: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def integrated(self) -> float:
        return _trapezoid(self.values, self.omega_grid)


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def _vectors(L: GmeLiouvillian, rho, fields: FieldOperators):
    r = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    if fields.d != L.d or r.shape[0] != L.d:
        raise ValueError("field operators, state and Liouvillian disagree on d")
    source = (fields.e_plus @ r).reshape(-1)
    probe = fields.e_minus.T.reshape(-1)  # probe . vec(X) = Tr(E- X)
    return source, probe


def qrt_spectrum(L: GmeLiouvillian, rho_ss, fields: FieldOperators, omega_grid,
                 method: str = "eig") -> SpectrumResult:
    """S(w) = Re Tr[E- (i w - L)^{-1} vec(E+ rho_ss)].

    ``direct`` factorizes (i w - L) per grid point; ``eig`` diagonalizes L
    once and sums the poles, which is much faster for fine grids. Values
    between -1e-10 and 0 are clipped to zero; anything more negative is
    kept and counted in ``meta["negative"]``.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.ndim != 1 or omega_grid.size == 0 or np.any(np.diff(omega_grid) <= 0):
        raise ValueError("omega_grid must be a non-empty ascending 1-d array")
    source, probe = _vectors(L, rho_ss, fields)
    n = L.d ** 2
    meta = {"method": method, "regularized": False, "negative": 0}
    if method == "eig":
        lam, right = sla.eig(L.matrix.toarray())
        coef_r = sla.solve(right, source)
        coef_l = probe @ right
        weights = coef_l * coef_r
        raw = np.empty(omega_grid.size)
        for s in range(0, omega_grid.size, 512):
            w = omega_grid[s:s + 512]
            raw[s:s + 512] = np.real((weights[None, :] / (1j * w[:, None] - lam[None, :])).sum(axis=1))
        meta["condition"] = float(np.linalg.cond(right))
    elif method == "direct":
        eye = sp.identity(n, dtype=complex, format="csc")
        mat = L.matrix.tocsc()
        raw = np.empty(omega_grid.size)
        eps = min((g for g in L.gammas if g > 0), default=1e-3)
        for i, w in enumerate(omega_grid):
            try:
                x = spla.splu(1j * w * eye - mat).solve(source)
            except RuntimeError:
                x = spla.splu((1j * w + eps) * eye - mat).solve(source)
                meta["regularized"] = True
            raw[i] = float(np.real(probe @ x))
    else:
        raise ValueError(f"unknown spectrum method {method!r}")
    meta["min_raw"] = float(raw.min())
    meta["negative"] = int(np.sum(raw < CLIP))
    values = np.where((raw < 0) & (raw >= CLIP), 0.0, raw)
    return SpectrumResult(omega_grid, values, {}, meta)


def correlation_fft(L: GmeLiouvillian, rho_ss, fields: FieldOperators, dt: float = 0.5,
                    n_steps: int = 65536):
    """Time-domain cross-check of the spectrum.

    g(tau) = Tr[E- exp(L tau) E+ rho] is propagated by Krylov action and
    S(w) = Re int_0^T e^{-i w tau} g(tau) d tau is evaluated on the FFT
    frequencies 2 pi k / (n_steps * dt) with trapezoid weights.
    Returns (omega, S) for omega >= 0.
    """
    source, probe = _vectors(L, rho_ss, fields)
    g = np.empty(n_steps, dtype=complex)
    v = source.copy()
    if L.d ** 2 <= 2500:
        step = sla.expm(L.matrix.toarray() * dt)
        for n in range(n_steps):
            g[n] = probe @ v
            v = step @ v
    else:
        mat = L.matrix.tocsr()
        block = 1024
        for s in range(0, n_steps, block):
            m = min(block, n_steps - s)
            traj = spla.expm_multiply(mat, v, start=0.0, stop=dt * (m - 1), num=m, endpoint=True)
            g[s:s + m] = traj @ probe
            v = spla.expm_multiply(mat * dt, traj[-1])
    g[0] *= 0.5
    # fft computes sum_n g_n exp(-2 pi i k n / N) = sum_n g_n exp(-i w_k t_n)
    spec = np.real(np.fft.fft(g)) * dt
    omega = 2 * np.pi * np.fft.fftfreq(n_steps, d=dt)
    keep = omega >= 0
    return omega[keep], spec[keep]


def transition_frequencies(energies: np.ndarray, deg_tol: float = DEG_TOL) -> np.ndarray:
    e = np.asarray(energies)
    dw = (e[None, :] - e[:, None]).ravel()
    return np.unique(np.round(dw[dw > deg_tol], 12))


def find_spectral_peaks(result: SpectrumResult, rel_prominence: float = 1e-3,
                        reference: Optional[float] = None):
    """Local maxima with prominence above ``rel_prominence`` of ``reference``.

    ``reference`` defaults to the spectrum maximum (pass the map maximum
    for map-wide thresholds). Returns (positions, heights).
    """
    vals = result.values
    ref = float(vals.max()) if reference is None else float(reference)
    if ref <= 0:
        return np.zeros(0), np.zeros(0)
    idx, _ = find_peaks(vals, prominence=rel_prominence * ref)
    return result.omega_grid[idx], vals[idx]


# -- per-lambda pipeline ---------------------------------------------------------

@dataclass(frozen=True)
class EmissionSetup:
    """Bath, truncation and output settings for one spectrum run.

    Defaults mirror gamma = 1e-3, T_a = 0.15, T_c = 0 with individual
    emitter baths and a 6 wc energy window. ``explicit`` replaces the
    generated channels by a fixed tuple of :class:`BathChannel`.
    """

    emitters: str = "individual"
    gamma: float = 1e-3
    t_emitters: float = 0.15
    t_cavity: float = 0.0
    halve_mixed: bool = True
    cavity_operator: str = "a"
    window: float = 6.0
    delta_f: Optional[float] = None
    field: str = "direct"
    method: str = "eig"
    eig_tol: float = 1e-9
    cutoff_ceiling: int = 4096
    explicit: Optional[tuple] = None

    def channels(self, params: ModelParams):
        if self.explicit is not None:
            return list(self.explicit)
        chans = default_channels(params, self.emitters, self.gamma, self.t_emitters,
                                 self.t_cavity, self.halve_mixed)
        if self.cavity_operator != "a":
            chans = [replace(c, cavity_operator=self.cavity_operator) if c.kind == "cavity" else c
                     for c in chans]
        return chans


@dataclass
class OpenSystemPoint:
    params: ModelParams
    eig: EigenSolution
    d: int
    liouvillian: GmeLiouvillian
    rho: DensityOperator
    fields: FieldOperators
    kernel_dim: int = 1


def _enough_levels(params: ModelParams, setup: EmissionSetup, k0: int = 40) -> EigenSolution:
    k = k0
    while True:
        eig = adaptive_solve(params, k, tol=setup.eig_tol, cutoff_ceiling=setup.cutoff_ceiling)
        span = eig.energies[-1] - eig.energies[0]
        if span > setup.window + 0.05 or k >= 2000:
            return eig
        k *= 2


def solve_open_system(params: ModelParams, setup: EmissionSetup = EmissionSetup()) -> OpenSystemPoint:
    """Diagonalize, build the GME on the energy window and find the steady state.

    A degenerate kernel (disconnected sectors) is resolved by relaxing
    from the ground state.
    """
    eig = _enough_levels(params, setup)
    d = choose_d_keep(eig.energies, setup.window)
    chans = setup.channels(params)
    L = build_gme(eig, chans, d, params, FilterSpec(setup.delta_f))
    try:
        rho = steady_state(L)
    except KernelDimensionError as exc:
        if exc.dim < 2:
            raise
        ground = np.zeros((d, d), dtype=complex)
        ground[0, 0] = 1.0
        rho = steady_state(L, initial=ground)
    fields = field_ops(eig, params, setup.field, d)
    return OpenSystemPoint(params, eig, d, L, rho, fields, getattr(rho, "kernel_dim", 1))


def spectrum_at(params: ModelParams, omega_grid, setup: EmissionSetup = EmissionSetup()) -> SpectrumResult:
    pt = solve_open_system(params, setup)
    res = qrt_spectrum(pt.liouvillian, pt.rho, pt.fields, omega_grid, setup.method)
    res.params = {"lam": params.lam, "n_emitters": params.n_emitters,
                  "omega_a": list(params.omega_a), **asdict(setup)}
    res.meta.update(d_keep=pt.d, cutoff=pt.eig.cutoff_used, kernel_dim=pt.kernel_dim,
                    W=emission_rate(pt.rho, pt.fields), residual=getattr(pt.rho, "residual", None))
    return res


def _map_task(args):
    params, omega_grid, setup = args
    t0 = time.perf_counter()
    try:
        res = spectrum_at(params, omega_grid, setup)
        return {"lam": params.lam, "status": "ok", "values": res.values, "meta": res.meta,
                "wall": time.perf_counter() - t0}
    except Exception as exc:  # noqa: BLE001 - a failed point leaves a gap in the map
        log.warning("spectrum at lam=%g failed: %s", params.lam, exc)
        return {"lam": params.lam, "status": "failed", "error": repr(exc), "values": None,
                "meta": {}, "wall": time.perf_counter() - t0}


def spectrum_map(params: ModelParams, lambda_grid, omega_grid,
                 setup: EmissionSetup = EmissionSetup(), workers: int = 1):
    """Row-major (lambda, omega) emission map.

    Failed lambda points become NaN rows and are listed in the returned
    manifest instead of aborting the map.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    omega_grid = np.asarray(omega_grid, dtype=float)
    tasks = [(params.with_lambda(float(l)), omega_grid, setup) for l in lambda_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_map_task, tasks))
    else:
        rows = [_map_task(t) for t in tasks]
    grid = np.full((lambda_grid.size, omega_grid.size), np.nan)
    manifest = []
    for i, r in enumerate(rows):
        if r["values"] is not None:
            grid[i] = r["values"]
        meta = {k: v for k, v in r["meta"].items() if not isinstance(v, np.ndarray)}
        manifest.append({"lambda": float(r["lam"]), "status": r["status"], "wall": r["wall"],
                         **({"error": r["error"]} if "error" in r else {}), **meta})
    return grid, manifest
