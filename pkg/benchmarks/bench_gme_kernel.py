"""Compare the compiled and numpy transition-pair kernels.

Usage: python benchmarks/bench_gme_kernel.py [--repeat 5]

Times ``gme_pairs`` on (a) the dressed transitions of real models and
(b) synthetic transition sets of growing size, and checks that both
backends produce the same sparse Liouvillian.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from dicke_usc import _kernels
from dicke_usc.models import ModelParams
from dicke_usc.open_system import coupling_operator, default_channels, dressed_jumps, choose_d_keep
from dicke_usc.spectrum import adaptive_solve


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _as_matrix(out, d):
    rows, cols, vals, k, g = out
    return sp.csr_matrix((vals, (rows, cols)), shape=(d * d, d * d)), k, g


def model_case(n, lam, window):
    p = ModelParams(n, lam=lam)
    eig = adaptive_solve(p, 60)
    d = choose_d_keep(eig.energies, window)
    ch = default_channels(p, "individual")[1]
    jumps = dressed_jumps(eig, coupling_operator(ch, p, eig.space), d)
    rate = ch.gamma * jumps.omega
    n_th = 1.0 / np.expm1(jumps.omega / ch.temperature)
    return (f"N={n} lam={lam} d={d}", jumps.omega, jumps.low, jumps.high, jumps.amp,
            rate * n_th, rate * (n_th + 1), d)


def synthetic_case(nt, d, seed=0):
    rng = np.random.default_rng(seed)
    omega = np.sort(rng.uniform(0.01, 5.0, nt))
    # a quarter of the transitions sit on exactly degenerate ladders
    q = nt // 4
    omega[:q] = np.repeat(np.linspace(0.5, 4.5, -(-q // 4)), 4)[:q]
    omega.sort()
    low = rng.integers(0, d // 2, nt)
    high = low + rng.integers(1, d // 2, nt)
    amp = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
    rate = 1e-3 * omega
    return f"synthetic nt={nt} d={d}", omega, low, high, amp, 0.01 * rate, rate, d


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--delta-f", type=float, default=0.1)
    args = ap.parse_args()
    cases = [model_case(2, 0.5, 6.0), model_case(3, 0.5, 5.0)]
    cases += [synthetic_case(nt, 60) for nt in (500, 2000, 8000)]
    print(f"compiled backend available: {_kernels.BACKEND == 'cython'}")
    print(f"{'case':<28}{'pairs':>10}{'numpy [s]':>12}{'compiled [s]':>14}{'speedup':>9}{'max diff':>11}")
    for name, omega, low, high, amp, a, b, d in cases:
        argv = (omega, np.ascontiguousarray(low, dtype=np.int64),
                np.ascontiguousarray(high, dtype=np.int64), np.ascontiguousarray(amp, dtype=complex),
                a, b, d, args.delta_f, 8 * args.delta_f, 1e-9)
        t_py, out_py = _best(lambda: _kernels.python_gme_pairs(*argv), args.repeat)
        m_py, k_py, g_py = _as_matrix(out_py, d)
        if _kernels.BACKEND == "cython":
            t_c, out_c = _best(lambda: _kernels.gme_pairs(*argv), args.repeat)
            m_c, k_c, g_c = _as_matrix(out_c, d)
            diff = max(abs(m_c - m_py).max(), np.abs(k_c - k_py).max(), np.abs(g_c - g_py).max())
            print(f"{name:<28}{len(out_py[2]):>10}{t_py:>12.4f}{t_c:>14.4f}{t_py / t_c:>9.1f}{diff:>11.1e}")
        else:
            print(f"{name:<28}{len(out_py[2]):>10}{t_py:>12.4f}{'n/a':>14}{'':>9}{'':>11}")


if __name__ == "__main__":
    main()
