"""Eigenvalue sweeps, multiplet counting, level labels and avoided crossings."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil, factorial
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .algebra import DickeJ, HilbertSpace, SparseOperator, spin_matrices
from .models import (
    HopfieldParams,
    ModelParams,
    build_hamiltonian,
    excitation_number,
    parity_operator,
)

log = logging.getLogger(__name__)

__all__ = [
    "EigenSolution",
    "LabeledLevel",
    "LevelSweep",
    "AvoidedCrossing",
    "HopfieldInstability",
    "solve_lowest",
    "initial_cutoff",
    "adaptive_solve",
    "degeneracy",
    "levels_per_j",
    "multiplet_sizes",
    "multiplet_level_counts",
    "sweep",
    "detect_crossings",
    "hopfield_polaritons",
    "hopfield_zero_point",
]

DEFAULT_CEILING = 4096
LAMBDA_TINY = 1e-6
LAMBDA_LABEL = 0.05
LAMBDA_STEP = 0.01
DENSE_LIMIT = 1200
_SEED = 20240611


@dataclass
class EigenSolution:
    """Lowest eigenpairs of a Hamiltonian.

    Attributes
    ----------
    energies : (k,) ndarray, ascending
    states : (dim, k) ndarray, orthonormal columns
    cutoff_used : int
    converged : bool
    residual : float
        max_i ||H v_i - E_i v_i||.
    """

    energies: np.ndarray
    states: np.ndarray
    cutoff_used: int
    converged: bool
    residual: float
    space: Optional[HilbertSpace] = None
    residuals: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return len(self.energies)

    def relative(self) -> np.ndarray:
        return self.energies - self.energies[0]

    def expect(self, op) -> np.ndarray:
        """Diagonal expectation values <v_i|op|v_i>."""
        m = op.matrix if isinstance(op, SparseOperator) else op
        return np.einsum("ij,ij->j", self.states.conj(), m @ self.states)

    def orthonormality_error(self) -> float:
        g = self.states.conj().T @ self.states
        return float(np.abs(g - np.eye(g.shape[0])).max())


def _gershgorin_lower(m: sp.csr_matrix) -> float:
    d = m.diagonal().real
    off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - off))


def solve_lowest(H: SparseOperator, k: int, tol: float = 1e-8,
                 sigma: Optional[float] = None, dense_limit: int = DENSE_LIMIT,
                 cutoff: Optional[int] = None) -> EigenSolution:
    """k lowest eigenpairs of a Hermitian operator.

    Dense LAPACK for small problems; otherwise ARPACK in shift-invert mode
    around ``sigma`` (a point just below the ground energy). Without a
    ``sigma`` the ground energy is first located from a Gershgorin bound.
    The starting vector is seeded, so results are reproducible.
    """
    m = H.matrix if isinstance(H, SparseOperator) else sp.csr_matrix(H)
    dim = m.shape[0]
    if not 0 < k < dim:
        raise ValueError(f"need 0 < k < dim, got k={k}, dim={dim}")
    space = H.space if isinstance(H, SparseOperator) else None
    cutoff = cutoff if cutoff is not None else (space.fock_cutoff if space else -1)
    if dim <= dense_limit:
        vals, vecs = np.linalg.eigh(m.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        v0 = np.random.default_rng(_SEED).standard_normal(dim) + 0j
        if sigma is None:
            e0 = spla.eigsh(m, k=1, sigma=_gershgorin_lower(m), which="LM", v0=v0,
                            tol=1e-6, return_eigenvectors=False)
            sigma = float(np.min(e0)) - 0.5
        try:
            vals, vecs = spla.eigsh(m, k=k, sigma=sigma, which="LM", v0=v0, tol=0.0)
        except spla.ArpackNoConvergence as exc:
            log.warning("ARPACK did not converge: %s", exc)
            vals, vecs = exc.eigenvalues, exc.eigenvectors
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            res = np.linalg.norm(m @ vecs - vecs * vals, axis=0) if len(vals) else np.array([np.inf])
            return EigenSolution(vals, vecs, cutoff, False, float(np.max(res)), space, res)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # reorthonormalize degenerate clusters returned by ARPACK
        vecs, _ = np.linalg.qr(vecs)
        hsub = vecs.conj().T @ (m @ vecs)
        w, u = np.linalg.eigh(0.5 * (hsub + hsub.conj().T))
        vals, vecs = w, vecs @ u
    res = np.linalg.norm(m @ vecs - vecs * vals, axis=0)
    resid = float(res.max())
    return EigenSolution(np.asarray(vals, dtype=float), vecs, cutoff, resid < tol, resid, space, res)


# -- adaptive truncation -----------------------------------------------------

def initial_cutoff(params: ModelParams) -> int:
    """n0 = ceil(4 eta^2 j^2 + 8 eta j + 20) photons.

    Coherent displacement of the dressed vacuum is |alpha| = 2 eta m, so
    its mean photon number is at most 4 eta^2 j^2.
    """
    eta, j = params.eta, params.j_max
    return int(ceil(4 * eta**2 * j**2 + 8 * eta * j + 20))


def adaptive_solve(params: ModelParams, k: int, tol: float = 1e-9,
                   builder: Optional[Callable] = None, cutoff_ceiling: int = DEFAULT_CEILING,
                   n0: Optional[int] = None, growth: float = 1.5) -> EigenSolution:
    """Escalate the Fock cutoff until the k lowest eigenvalues move less than ``tol``.

    ``builder(params, space)`` defaults to the gauge named in ``params``.
    Returns the solution at the last cutoff; ``converged`` is False when the
    ceiling is reached first.
    """
    builder = builder or build_hamiltonian
    cutoff = min(n0 if n0 is not None else initial_cutoff(params), cutoff_ceiling)
    prev = None
    sigma = None
    while True:
        space = params.space(cutoff)
        sol = solve_lowest(builder(params, space), k, sigma=sigma)
        if prev is not None and np.max(np.abs(sol.energies - prev.energies)) < tol:
            sol.converged = sol.converged or sol.residual < 1e-6
            return sol
        if cutoff >= cutoff_ceiling:
            sol.converged = False
            log.warning("cutoff ceiling %d reached for lam=%g", cutoff_ceiling, params.lam)
            return sol
        prev = sol
        sigma = float(sol.energies[0]) - 0.5
        cutoff = min(int(ceil(cutoff * growth)), cutoff_ceiling)


# -- multiplet counting ------------------------------------------------------

def _j_values(N: int):
    two_j = np.arange(N % 2, N + 1, 2)
    return [t / 2 for t in two_j]


def degeneracy(N: int, j: float) -> int:
    """Number of spin-j multiplets in N spins-1/2: N!(2j+1)/((N/2+j+1)!(N/2-j)!)."""
    two_j = int(round(2 * j))
    if two_j < 0 or two_j > N or (N - two_j) % 2:
        raise ValueError(f"j={j} is not allowed for N={N}")
    hi, lo = (N + two_j) // 2 + 1, (N - two_j) // 2
    num = factorial(N) * (two_j + 1)
    den = factorial(hi) * factorial(lo)
    if num % den:
        raise ArithmeticError("degeneracy formula is not integral")
    return num // den


def levels_per_j(N: int, c: int, j: float) -> int:
    """Bare states of excitation number c inside one spin-j multiplet.

    Equals c + j + (2 - N)/2 below saturation and 2j + 1 above it,
    clipped at zero when c is too small to reach the multiplet.
    """
    two_j = int(round(2 * j))
    if c < (two_j + N) / 2:
        k2 = 2 * c + two_j + 2 - N
        return max(k2 // 2, 0)
    return two_j + 1


def multiplet_sizes(N: int, c: int) -> int:
    """M_c: total number of bare states with excitation number c."""
    if c < 0:
        raise ValueError("c must be >= 0")
    if c >= N:
        return 2**N
    return sum(levels_per_j(N, c, j) * degeneracy(N, j) for j in _j_values(N))


def multiplet_level_counts(N: int, c: int) -> int:
    """Distinct resonant TC levels in multiplet c (exact degeneracies counted once)."""
    return sum(levels_per_j(N, c, j) for j in _j_values(N))


# -- labelled sweeps ---------------------------------------------------------

@dataclass
class LabeledLevel:
    c_tilde: int
    k_tilde: int
    energy_rel: float
    parity: int
    uncertain: bool = False


@dataclass
class AvoidedCrossing:
    lambda_star: float
    gap: float
    level_a: tuple
    level_b: tuple
    same_parity: bool = True

    def to_dict(self):
        return {"lambda_star": self.lambda_star, "gap": self.gap,
                "a": list(self.level_a), "b": list(self.level_b)}


@dataclass
class LevelSweep:
    """Continuously tracked levels across a coupling grid.

    ``energies[i, l]`` is the ground-referenced energy of tracked level ``l``
    at ``lambda_grid[i]``; ``labels[l]`` is its (c_tilde, k_tilde).
    """

    lambda_grid: np.ndarray
    energies: np.ndarray
    labels: list
    parity: np.ndarray
    j_sector: np.ndarray
    cutoff_used: int
    uncertain: np.ndarray
    params: ModelParams
    crossings: list = field(default_factory=list)
    sorted_energies: Optional[np.ndarray] = None
    ground_energy: Optional[np.ndarray] = None

    def absolute(self) -> np.ndarray:
        """Tracked energies before ground referencing."""
        return self.energies + self.ground_energy[:, None]

    @property
    def levels(self) -> list:
        out = []
        for i in range(len(self.lambda_grid)):
            out.append([LabeledLevel(c, k, float(self.energies[i, l]), int(self.parity[l]),
                                     bool(self.uncertain[i, l]))
                        for l, (c, k) in enumerate(self.labels)])
        return out

    def index(self, c: int, k: int) -> list:
        return [l for l, lab in enumerate(self.labels) if lab == (c, k)]

    def energy(self, c: int, k: int) -> np.ndarray:
        idx = self.index(c, k)
        if not idx:
            raise KeyError(f"no level labelled ({c}, {k})")
        return self.energies[:, idx[0]]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "c_tilde", "k_tilde", "energy_rel", "parity", "cutoff_used"])
            for i, lam in enumerate(self.lambda_grid):
                for l, (c, k) in enumerate(self.labels):
                    w.writerow([repr(float(lam)), c, k, repr(float(self.energies[i, l])),
                                int(self.parity[l]), self.cutoff_used])

    def write_crossings(self, path):
        with open(path, "w") as fh:
            json.dump([x.to_dict() for x in self.crossings], fh, indent=2)


class _PointSolver:
    """Picklable per-lambda diagonalization used by the sweep workers."""

    def __init__(self, params: ModelParams, cutoff: int, k: int):
        self.params, self.cutoff, self.k = params, cutoff, k
        self.cache = {}

    def __getstate__(self):
        return {"params": self.params, "cutoff": self.cutoff, "k": self.k, "cache": {}}

    def __call__(self, lam: float):
        lam = float(lam)
        hit = self.cache.get(lam)
        if hit is None:
            p = self.params.with_lambda(lam)
            sol = solve_lowest(build_hamiltonian(p, p.space(self.cutoff)), self.k)
            hit = self.cache[lam] = (sol.energies, sol.states)
        return hit


def _j_operator(params: ModelParams, space: HilbertSpace) -> Optional[sp.csr_matrix]:
    if isinstance(params.spin_rep, DickeJ) or not params.identical:
        return None
    mats = spin_matrices(params.spin_rep)
    j2 = mats["Jx"] @ mats["Jx"] + mats["Jy"] @ mats["Jy"] + mats["Jz"] @ mats["Jz"]
    return sp.kron(sp.identity(space.photon_dim, format="csr"), j2, format="csr")


def _clusters(energies: np.ndarray, tol: float) -> list:
    groups, start = [], 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > tol:
            groups.append(list(range(start, i)))
            start = i
    return groups


class _Tracker:
    """Overlap-based continuation of a fixed set of levels."""

    def __init__(self, cluster_tol: float):
        self.cluster_tol = cluster_tol

    def step(self, prev_vecs: np.ndarray, energies: np.ndarray, vecs: np.ndarray):
        """Match tracked vectors onto a new eigenbasis.

        Returns (assignment index into the new basis, new tracked vectors,
        minimum overlap weight). Degenerate clusters of the new basis are
        rotated to align with the tracked vectors before assignment.
        """
        groups = _clusters(energies, self.cluster_tol)
        ov = vecs.conj().T @ prev_vecs  # new x tracked
        weight = np.abs(ov) ** 2
        cols, owner = [], []
        for g in groups:
            for i in g:
                cols.append(weight[g].sum(axis=0))
                owner.append(i)
        cost = -np.array(cols).T  # tracked x new
        rows, chosen = linear_sum_assignment(cost)
        assign = np.empty(prev_vecs.shape[1], dtype=int)
        assign[rows] = np.asarray(owner)[chosen]
        best = np.empty(prev_vecs.shape[1])
        best[rows] = -cost[rows, chosen]
        new_vecs = vecs[:, assign].copy()
        for g in groups:
            members = [t for t in range(len(assign)) if assign[t] in g]
            if len(g) < 2 or not members:
                continue
            w = vecs[:, g]
            u, _, vh = np.linalg.svd(w.conj().T @ prev_vecs[:, members], full_matrices=False)
            new_vecs[:, members] = w @ (u @ vh)
        return assign, new_vecs, best


def _label_path(target: float) -> list:
    """Couplings from LAMBDA_TINY up to ``target`` in steps of at most LAMBDA_STEP."""
    if target <= LAMBDA_TINY:
        return [target]
    n = max(int(ceil((target - LAMBDA_TINY) / LAMBDA_STEP)), 1)
    return list(np.linspace(LAMBDA_TINY, target, n + 1)[1:])


def _solve_grid(solver: _PointSolver, grid, workers: int):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(solver, grid))
        for lam, res in zip(grid, out):
            solver.cache[float(lam)] = res
        return out
    return [solver(l) for l in grid]


def sweep(params: ModelParams, lambda_grid, k: int, *, buffer: Optional[int] = None,
          cutoff: Optional[int] = None, cutoff_tol: float = 1e-8, max_depth: int = 6,
          cluster_tol: float = 1e-7, gap_ceiling: float = 0.15, workers: int = 1,
          find_crossings: bool = True) -> LevelSweep:
    """Track the k lowest levels across ``lambda_grid`` and label them (c~, k~).

    The Fock cutoff is fixed at the value converged for the largest grid
    coupling. c~, parity and total spin are read off states at a tiny
    coupling; k~ orders the levels inside each multiplet by energy at
    lambda = 0.05, reached by continuation. Consecutive
    points are linked by maximum eigenvector overlap; if a tracked level's
    best overlap drops below 0.5 the interval is bisected up to
    ``max_depth`` times, after which that level is flagged uncertain.
    Detected avoided crossings swap labels so curves read as crossing.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda_grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("lambda must be >= 0")
    buffer = buffer if buffer is not None else max(6, k // 2)
    k_solve = k + buffer
    if cutoff is None:
        sol = adaptive_solve(params.with_lambda(grid[-1]), k_solve, tol=cutoff_tol)
        cutoff = sol.cutoff_used
    space = params.space(cutoff)
    solver = _PointSolver(params, cutoff, k_solve)
    results = _solve_grid(solver, grid, workers)

    tracker = _Tracker(cluster_tol)
    # symmetry labels from states resolved at a tiny coupling
    e_tiny, v_tiny = solver(LAMBDA_TINY)
    cmat = excitation_number(params, space).matrix
    c_vals = np.real(np.einsum("ij,ij->j", v_tiny.conj(), cmat @ v_tiny))
    c_tilde = np.rint(c_vals).astype(int)
    parity, j_sector = _sector_keys(params, space, v_tiny)
    c_tilde, parity, j_sector = c_tilde[:k], parity[:k], j_sector[:k]

    # k~ from the energy order at a small coupling, reached by continuation
    probe = _label_path(min(LAMBDA_LABEL, grid[-1]) if grid[0] == 0.0 else LAMBDA_LABEL)
    vecs, lab_e = v_tiny[:, :k], e_tiny[:k]
    for lam in probe:
        e_p, v_p = solver(lam)
        assign, vecs, _ = tracker.step(vecs, e_p, v_p)
        lab_e = e_p[assign]
    labels = _assign_k_tilde(c_tilde, lab_e, j_sector, k, cluster_tol)

    if grid[0] == 0.0:
        tracked = v_tiny[:, :k]
    else:
        tracked = v_tiny[:, :k]
        for lam in _label_path(grid[0])[:-1]:
            e_p, v_p = solver(lam)
            _, tracked, _ = tracker.step(tracked, e_p, v_p)

    n = len(grid)
    energies = np.empty((n, k))
    uncertain = np.zeros((n, k), dtype=bool)
    sorted_e = np.empty((n, k_solve))
    ground = np.array([r[0][0] for r in results])
    for i in range(n):
        e_new, v_new = results[i]
        sorted_e[i] = e_new - e_new[0]
        if i == 0 and grid[0] == 0.0:
            energies[0] = e_new[:k] - e_new[0]
            continue
        lo = grid[i - 1] if i else max(grid[0] - LAMBDA_STEP, LAMBDA_TINY)
        # bisection through intermediate couplings when overlaps are poor
        path = []
        for depth in range(max_depth + 1):
            vecs = tracked
            worst = np.ones(k)
            for lam in path:
                e_mid, v_mid = solver(lam)
                _, vecs, w = tracker.step(vecs, e_mid, v_mid)
                worst = np.minimum(worst, w)
            assign, vecs, w = tracker.step(vecs, e_new, v_new)
            worst = np.minimum(worst, w)
            if worst.min() >= 0.5 or depth == max_depth:
                break
            path = list(np.linspace(lo, grid[i], 2 ** (depth + 1) + 1)[1:-1])
        tracked = vecs
        energies[i] = e_new[assign] - e_new[0]
        uncertain[i] = worst < 0.5
        if uncertain[i].any():
            log.warning("sweep: uncertain continuation at lam=%g", grid[i])

    result = LevelSweep(grid, energies, labels, parity, j_sector, cutoff,
                        uncertain, params, [], sorted_e, ground)
    if find_crossings:
        result.crossings = detect_crossings(result, gap_ceiling=gap_ceiling,
                                            cluster_tol=cluster_tol, apply_swaps=True,
                                            _solver=solver)
    return result


def _assign_k_tilde(c_tilde, energies, j_sector, k, cluster_tol):
    """k~ = rank of distinct levels inside each multiplet.

    Exactly degenerate copies of the same total spin share one k~; energy
    ties between different spins are broken by j descending.
    """
    js = np.nan_to_num(j_sector, nan=0.0)
    labels = []
    for l in range(k):
        same = np.where(c_tilde == c_tilde[l])[0]
        order = same[np.argsort(energies[same], kind="stable")]
        groups = _clusters(energies[order], cluster_tol)
        distinct = []
        for g in groups:
            members = order[g]
            for jv in sorted(set(js[members].tolist()), reverse=True):
                distinct.append((members[js[members] == jv]).tolist())
        kt = next(r for r, d in enumerate(distinct, 1) if l in d)
        labels.append((int(c_tilde[l]), kt))
    return labels


def _sector_gaps(energies, parity, j_sector, cluster_tol):
    """For each sector, ascending distinct energies (cluster representatives)."""
    out = {}
    for key in sorted(set(zip(parity.tolist(), np.nan_to_num(j_sector, nan=-1).tolist()))):
        mask = (parity == key[0]) & (np.nan_to_num(j_sector, nan=-1) == key[1])
        e = np.sort(energies[mask])
        if e.size:
            rep = [e[0]] + [b for a, b in zip(e[:-1], e[1:]) if b - a > cluster_tol]
            out[key] = np.asarray(rep)
    return out


def _sector_keys(params, space, vecs):
    pmat = parity_operator(params, space).matrix
    par = np.sign(np.real(np.einsum("ij,ij->j", vecs.conj(), pmat @ vecs))).astype(int)
    j2 = _j_operator(params, space)
    if j2 is not None:
        jj = np.real(np.einsum("ij,ij->j", vecs.conj(), j2 @ vecs))
        js = np.rint(2 * (np.sqrt(0.25 + jj) - 0.5)) / 2
    elif isinstance(params.spin_rep, DickeJ):
        js = np.full(vecs.shape[1], params.spin_rep.j)
    else:
        js = np.full(vecs.shape[1], np.nan)
    return par, js


def _gap_at(solver: _PointSolver, lam: float, key, rank: int, cluster_tol: float) -> float:
    e, v = solver(lam)
    par, js = _sector_keys(solver.params, solver.params.space(solver.cutoff), v)
    reps = _sector_gaps(e, par, js, cluster_tol).get(key)
    if reps is None or reps.size <= rank + 1:
        return np.inf
    return float(reps[rank + 1] - reps[rank])


def detect_crossings(sw: LevelSweep, gap_ceiling: float = 0.15, cluster_tol: float = 1e-7,
                     refine_tol: float = 1e-4, apply_swaps: bool = False, _solver=None) -> list:
    """Same-sector avoided crossings among the tracked levels.

    A sector is (parity, total spin j) for identical emitters and parity
    alone otherwise. Interior local minima of consecutive in-sector gaps
    below ``gap_ceiling`` are refined by golden-section search on the gap,
    re-diagonalizing at each probe. Refined gaps below 1e-6 are treated as
    exact crossings and dropped.

    Crossings are labelled in order of increasing lambda*, each one after
    the label exchanges of all earlier crossings. With ``apply_swaps`` the
    exchanges are written back into ``sw``.
    """
    params = sw.params
    solver = _solver or _PointSolver(params, sw.cutoff_used, sw.sorted_energies.shape[1])
    grid = sw.lambda_grid
    n_track = len(sw.labels)
    par_all, js_all = sw.parity[:n_track], sw.j_sector[:n_track]
    # consecutive in-sector gaps from sorted energies at each grid point
    sector_cache = []
    for lam in grid:
        if lam == 0.0:
            sector_cache.append(None)
            continue
        e, v = solver(lam)
        par, js = _sector_keys(params, params.space(sw.cutoff_used), v)
        sector_cache.append(_sector_gaps(e - e[0], par, js, cluster_tol))
    keys = set()
    for c in sector_cache:
        if c:
            keys |= set(c)
    candidates = []
    for key in sorted(keys):
        n_rank = min(len(c[key]) for c in sector_cache if c and key in c)
        for r in range(n_rank - 1):
            g = np.array([c[key][r + 1] - c[key][r] if c and key in c else np.nan
                          for c in sector_cache])
            for i in range(1, len(grid) - 1):
                if sector_cache[i - 1] is None:
                    continue
                if not (g[i] < g[i - 1] and g[i] <= g[i + 1] and g[i] < gap_ceiling):
                    continue
                pos = _match_pair(sw.energies, key, r, i, par_all, js_all, sector_cache[i])
                if pos is None:
                    continue
                lam_star, gap = _golden(lambda x: _gap_at(solver, x, key, r, cluster_tol),
                                        grid[i - 1], grid[i + 1], refine_tol)
                if gap < 1e-6:
                    continue
                candidates.append((lam_star, gap, key, r, i))
    candidates.sort(key=lambda c: c[0])
    energies = sw.energies if apply_swaps else sw.energies.copy()
    uncertain = sw.uncertain if apply_swaps else sw.uncertain.copy()
    found = []
    for lam_star, gap, key, r, i in candidates:
        a, b = _match_pair(energies, key, r, i, par_all, js_all, sector_cache[i])
        i0 = i - 1
        if energies[i0, a] > energies[i0, b]:
            a, b = b, a
        found.append(AvoidedCrossing(float(lam_star), float(gap), sw.labels[a], sw.labels[b], True))
        _swap_pair(energies, uncertain, grid, a, b, lam_star)
    return found


def _match_pair(energies, key, rank, i, par, js, cache, match_tol=1e-7):
    """Tracked columns sitting at sector ranks (rank, rank+1) of grid index i."""
    lo_e, hi_e = cache[key][rank], cache[key][rank + 1]
    js_key = np.nan_to_num(js, nan=-1)
    cand = [l for l in range(len(par)) if par[l] == key[0] and js_key[l] == key[1]]
    a = [l for l in cand if abs(energies[i, l] - lo_e) < match_tol]
    b = [l for l in cand if abs(energies[i, l] - hi_e) < match_tol and l not in a[:1]]
    if not a or not b:
        return None
    return a[0], b[0]


_INVPHI = (np.sqrt(5) - 1) / 2


def _golden(f, a, b, tol):
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _swap_pair(energies, uncertain, grid, a, b, lam_star):
    """Exchange columns a and b past lam_star if tracking stayed adiabatic there."""
    before = grid < lam_star
    after = ~before
    if not before.any() or not after.any():
        return
    i0 = np.where(before)[0][-1]
    i1 = np.where(after)[0][0]
    lower_before = energies[i0, a] <= energies[i0, b]
    lower_after = energies[i1, a] <= energies[i1, b]
    if lower_before == lower_after:
        energies[after, a], energies[after, b] = energies[after, b].copy(), energies[after, a].copy()
        uncertain[after, a], uncertain[after, b] = uncertain[after, b].copy(), uncertain[after, a].copy()


# -- Hopfield limit ----------------------------------------------------------

class HopfieldInstability(ArithmeticError):
    pass


def _hopfield_matrix(params: HopfieldParams, include_p2: bool = True) -> np.ndarray:
    """Quadratic form of the dipole-gauge Hopfield model in r = (xa, xb, pa, pb)."""
    wc, wa, lam = params.omega_c, params.omega_a, params.lam
    hm = np.zeros((4, 4))
    hm[0, 0] = wc
    hm[2, 2] = wc
    hm[1, 1] = wa + (4 * wc * lam**2 if include_p2 else 0.0)
    hm[3, 3] = wa
    hm[1, 2] = hm[2, 1] = 2 * wc * lam
    return hm


def hopfield_polaritons(params: HopfieldParams, include_p2: bool = True) -> tuple:
    """Bogoliubov frequencies (omega_minus, omega_plus) of the Hopfield model.

    Solved as the symplectic eigenproblem of the 4x4 quadratic form.
    Raises :class:`HopfieldInstability` when the form is not positive
    definite (superradiant instability without the self-polarization term).
    """
    hm = _hopfield_matrix(params, include_p2)
    if np.linalg.eigvalsh(hm).min() <= 0:
        raise HopfieldInstability(f"Hopfield model unstable at lam={params.lam}")
    jmat = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
    ev = np.linalg.eigvals(jmat @ hm)
    freqs = np.sort(np.abs(ev.imag))[::2]
    return float(freqs[0]), float(freqs[1])


def hopfield_zero_point(params: HopfieldParams) -> float:
    """Ground energy of the normal-ordered Hopfield Hamiltonian."""
    wm, wp = hopfield_polaritons(params)
    return 0.5 * (wm + wp) - 0.5 * (params.omega_c + params.omega_a)
