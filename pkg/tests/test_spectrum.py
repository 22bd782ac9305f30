import csv
import json
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dicke_usc.algebra import DickeJ
from dicke_usc.models import ModelParams, build_hamiltonian
from dicke_usc.spectrum import (adaptive_solve, degeneracy, initial_cutoff, levels_per_j,
                                multiplet_level_counts, multiplet_sizes, solve_lowest, sweep)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12))
def test_degeneracies_fill_the_spin_space(N):
    js = [t / 2 for t in range(N % 2, N + 1, 2)]
    assert sum(int(2 * j + 1) * degeneracy(N, j) for j in js) == 2**N


def test_known_degeneracies_and_multiplets():
    assert [degeneracy(4, j) for j in (0, 1, 2)] == [2, 3, 1]
    assert [multiplet_sizes(2, c) for c in range(4)] == [1, 3, 4, 4]
    assert [multiplet_sizes(3, c) for c in range(5)] == [1, 4, 7, 8, 8]
    assert levels_per_j(2, 0, 0) == 0 and levels_per_j(2, 1, 0) == 1
    assert multiplet_level_counts(2, 1) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10))
def test_multiplet_sum_rule(N, c):
    js = [t / 2 for t in range(N % 2, N + 1, 2)]
    assert sum(degeneracy(N, j) * levels_per_j(N, c, j) for j in js) == multiplet_sizes(N, c)
    assert multiplet_sizes(N, c) == sum(comb(N, e) for e in range(min(c, N) + 1))


def test_sparse_and_dense_paths_agree():
    p = ModelParams(2, lam=0.7)
    s = p.space(40)
    h = build_hamiltonian(p, s)
    dense = solve_lowest(h, 10)
    sparse = solve_lowest(h, 10, dense_limit=0)
    assert np.abs(dense.energies - sparse.energies).max() < 1e-10
    assert sparse.orthonormality_error() < 1e-10
    assert sparse.converged and sparse.residual < 1e-8


def test_sparse_solve_is_reproducible():
    p = ModelParams(3, lam=0.9)
    h = build_hamiltonian(p, p.space(60))
    a = solve_lowest(h, 8, dense_limit=0).energies
    b = solve_lowest(h, 8, dense_limit=0).energies
    assert np.array_equal(a, b)


def test_adaptive_solve_converges():
    p = ModelParams(1, lam=1.5)
    sol = adaptive_solve(p, 6)
    assert sol.converged
    assert sol.cutoff_used >= initial_cutoff(p)
    bigger = solve_lowest(build_hamiltonian(p, p.space(sol.cutoff_used * 2)), 6).energies
    assert np.abs(sol.energies - bigger).max() < 1e-8


def test_adaptive_solve_flags_ceiling():
    sol = adaptive_solve(ModelParams(1, lam=5.0), 4, cutoff_ceiling=20, n0=10)
    assert not sol.converged


@pytest.fixture(scope="module")
def n2_sweep():
    return sweep(ModelParams(2), np.linspace(0.0, 1.0, 51), 12)


def test_sweep_labels(n2_sweep):
    labels = n2_sweep.labels
    assert labels[0] == (0, 1)
    assert len(set(labels)) == len(labels)
    counts = {c: len({k for cc, k in labels if cc == c}) for c in (0, 1)}
    assert counts == {0: 1, 1: 3}


def test_dark_ladder_is_flat(n2_sweep):
    absolute = n2_sweep.absolute()
    for c in (1, 2, 3):
        e = absolute[:, n2_sweep.index(c, 2)[0]]
        assert np.ptp(e) < 1e-9
        assert np.isclose(e[0], c - 1.0)


def test_level_continuity(n2_sweep):
    # tracked curves never jump by more than the grid allows
    steps = np.abs(np.diff(n2_sweep.energies, axis=0))
    assert steps.max() < 0.1
    assert not n2_sweep.uncertain.any()


def test_crossing_found(n2_sweep):
    hits = [x for x in n2_sweep.crossings if {x.level_a, x.level_b} == {(1, 3), (3, 1)}]
    assert len(hits) == 1
    assert 0.6 <= hits[0].lambda_star <= 0.7
    assert hits[0].same_parity


def test_sweep_outputs(tmp_path, n2_sweep):
    n2_sweep.write_csv(tmp_path / "levels.csv")
    n2_sweep.write_crossings(tmp_path / "crossings.json")
    rows = list(csv.DictReader(open(tmp_path / "levels.csv")))
    assert set(rows[0]) == {"lambda", "c_tilde", "k_tilde", "energy_rel", "parity", "cutoff_used"}
    assert len(rows) == 51 * 12
    data = json.load(open(tmp_path / "crossings.json"))
    assert all({"lambda_star", "gap", "a", "b"} <= set(d) for d in data)


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        sweep(ModelParams(1), [0.5, 0.2], 4)


def test_dicke_sweep_sector():
    sw = sweep(ModelParams(4, spin_rep=DickeJ(2)), np.linspace(0.0, 0.5, 11), 6, find_crossings=False)
    assert sw.labels[:3] == [(0, 1), (1, 1), (1, 2)]
    assert np.all(sw.j_sector == 2)
