import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from dicke_usc import _kernels


def _random_transitions(seed, d, nt):
    rng = np.random.default_rng(seed)
    e = np.sort(rng.uniform(0, 3, d))
    e[1:3] = e[1]  # one degenerate pair
    hi = rng.integers(1, d, nt)
    lo = np.array([rng.integers(0, h) for h in hi])
    omega = e[hi] - e[lo]
    order = np.argsort(omega, kind="stable")
    amp = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
    absorb = rng.uniform(0, 1e-3, nt)
    emit = absorb + rng.uniform(0, 1e-3, nt)
    return (omega[order], lo[order].astype(np.int64), hi[order].astype(np.int64),
            amp[order], absorb[order], emit[order])


def _dense(out, d):
    rows, cols, vals, kmat, gmat = out
    m = sp.coo_matrix((vals, (rows, cols)), shape=(d * d, d * d)).toarray()
    return m, kmat, gmat


@pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled kernel not built")
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(3, 9), nt=st.integers(1, 40),
       delta_f=st.sampled_from([0.0, 1e-3, 0.1, 1.0]))
def test_compiled_matches_python(seed, d, nt, delta_f):
    tr = _random_transitions(seed, d, nt)
    window = max(8 * delta_f, 1e-9)
    args = (*tr, d, delta_f, window, 1e-9)
    fast = _dense(_kernels.gme_pairs(*args), d)
    slow = _dense(_kernels.python_gme_pairs(*args), d)
    for a, b in zip(fast, slow):
        assert np.abs(a - b).max() <= 1e-14 * max(1.0, np.abs(b).max())


def test_zero_width_filter_keeps_only_degenerate_pairs():
    omega = np.array([0.5, 0.5, 0.7])
    low = np.array([0, 1, 0])
    high = np.array([2, 3, 3])
    amp = np.ones(3, dtype=complex)
    rates = np.ones(3)
    rows, cols, vals, *_ = _kernels.python_gme_pairs(omega, low, high, amp, rates, rates,
                                                     4, 0.0, 1e-9, 1e-9)
    # absorption and emission sandwiches for the 3 diagonal pairs and 2 degenerate cross pairs
    assert len(vals) == 2 * (3 + 2)


def test_pure_python_switch():
    env = dict(os.environ, DICKE_USC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from dicke_usc import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
