"""Numpy implementation of the transition-pair loop (fallback backend)."""
import numpy as np


def _filter(dw, delta_f, deg_tol):
    if delta_f > 0.0:
        f = np.exp(-dw * dw / (2.0 * delta_f * delta_f))
    else:
        f = np.zeros_like(dw)
    f[np.abs(dw) < deg_tol] = 1.0
    return f


def gme_pairs(omega, low, high, amp, absorb, emit, d, delta_f, window, deg_tol):
    """Pair terms for transitions sorted by ascending ``omega``.

    For every pair (t, u) with |omega_t - omega_u| inside the filter window
    and filter value F:

    * absorption sandwich  L[(hi_u, hi_t), (lo_u, lo_t)] += (A_u + A_t)/2 F P_t P_u*
    * emission sandwich    L[(lo_t, lo_u), (hi_t, hi_u)] += (B_t + B_u)/2 F P_t P_u*
    * K[lo_t, lo_u] += A_u F P_t P_u*   when hi_t == hi_u
    * G[hi_u, hi_t] += B_t F P_t P_u*   when lo_t == lo_u

    Returns ``(rows, cols, vals, K, G)``.
    """
    omega = np.asarray(omega, dtype=float)
    low = np.asarray(low, dtype=np.int64)
    high = np.asarray(high, dtype=np.int64)
    amp = np.asarray(amp, dtype=complex)
    absorb = np.asarray(absorb, dtype=float)
    emit = np.asarray(emit, dtype=float)
    half = window if delta_f > 0.0 else deg_tol
    nt = omega.size
    # one extra candidate on each side; the exact test below decides
    starts = np.maximum(np.searchsorted(omega, omega - half, side="left") - 1, 0)
    stops = np.minimum(np.searchsorted(omega, omega + half, side="right") + 1, nt)
    kmat = np.zeros((d, d), dtype=complex)
    gmat = np.zeros((d, d), dtype=complex)
    rows, cols, vals = [], [], []
    chunk = 256
    for c0 in range(0, nt, chunk):
        ts = np.arange(c0, min(c0 + chunk, nt))
        counts = stops[ts] - starts[ts]
        t = np.repeat(ts, counts)
        u = np.concatenate([np.arange(starts[i], stops[i]) for i in ts]) if t.size else t
        # guard the window edge exactly as the compiled loop does
        keep = np.abs(omega[u] - omega[t]) <= half
        t, u = t[keep], u[keep]
        f = _filter(omega[t] - omega[u], delta_f, deg_tol)
        cross = amp[t] * amp[u].conj() * f
        rows.append(high[u] * d + high[t])
        cols.append(low[u] * d + low[t])
        vals.append(0.5 * (absorb[u] + absorb[t]) * cross)
        rows.append(low[t] * d + low[u])
        cols.append(high[t] * d + high[u])
        vals.append(0.5 * (emit[t] + emit[u]) * cross)
        same_hi = high[t] == high[u]
        np.add.at(kmat, (low[t][same_hi], low[u][same_hi]), absorb[u][same_hi] * cross[same_hi])
        same_lo = low[t] == low[u]
        np.add.at(gmat, (high[u][same_lo], high[t][same_lo]), emit[t][same_lo] * cross[same_lo])
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=complex)
    return rows, cols, vals, kmat, gmat
