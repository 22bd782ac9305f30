# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled transition-pair loop of the dressed master equation."""
import numpy as np

from libc.math cimport exp, fabs


cdef inline double _filter(double dw, double delta_f, double deg_tol) nogil:
    if fabs(dw) < deg_tol:
        return 1.0
    if delta_f <= 0.0:
        return 0.0
    return exp(-dw * dw / (2.0 * delta_f * delta_f))


def gme_pairs(double[::1] omega, long[::1] low, long[::1] high, double complex[::1] amp,
              double[::1] absorb, double[::1] emit, Py_ssize_t d, double delta_f,
              double window, double deg_tol):
    """Pair terms for transitions sorted by ascending ``omega``.

    Returns COO triplets (rows, cols, vals) for the two sandwich terms and
    the dense one-sided matrices (K, G). See ``_pairs_py.gme_pairs``.
    """
    cdef Py_ssize_t nt = omega.shape[0]
    cdef Py_ssize_t t, u, start = 0, n_pairs = 0, pos = 0
    cdef double half = window if delta_f > 0.0 else deg_tol
    cdef double dw, f
    cdef double complex pt, pu, cross

    # first pass: count partners inside the window
    for t in range(nt):
        while omega[t] - omega[start] > half:
            start += 1
        u = start
        while u < nt and omega[u] - omega[t] <= half:
            n_pairs += 1
            u += 1

    rows_np = np.empty(2 * n_pairs, dtype=np.int64)
    cols_np = np.empty(2 * n_pairs, dtype=np.int64)
    vals_np = np.empty(2 * n_pairs, dtype=np.complex128)
    k_np = np.zeros((d, d), dtype=np.complex128)
    g_np = np.zeros((d, d), dtype=np.complex128)
    cdef long long[::1] rows = rows_np
    cdef long long[::1] cols = cols_np
    cdef double complex[::1] vals = vals_np
    cdef double complex[:, ::1] kmat = k_np
    cdef double complex[:, ::1] gmat = g_np

    start = 0
    for t in range(nt):
        while omega[t] - omega[start] > half:
            start += 1
        pt = amp[t]
        u = start
        while u < nt and omega[u] - omega[t] <= half:
            dw = omega[t] - omega[u]
            f = _filter(dw, delta_f, deg_tol)
            pu = amp[u]
            cross = pt * pu.conjugate()
            # absorption sandwich: rho_{hi_u, hi_t} <- rho_{lo_u, lo_t}
            rows[pos] = high[u] * d + high[t]
            cols[pos] = low[u] * d + low[t]
            vals[pos] = 0.5 * (absorb[u] + absorb[t]) * f * cross
            pos += 1
            # emission sandwich: rho_{lo_t, lo_u} <- rho_{hi_t, hi_u}
            rows[pos] = low[t] * d + low[u]
            cols[pos] = high[t] * d + high[u]
            vals[pos] = 0.5 * (emit[t] + emit[u]) * f * cross
            pos += 1
            if high[t] == high[u]:
                kmat[low[t], low[u]] += absorb[u] * f * cross
            if low[t] == low[u]:
                gmat[high[u], high[t]] += emit[t] * f * cross
            u += 1
    return rows_np, cols_np, vals_np, k_np, g_np
