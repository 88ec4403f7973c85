"""Inner loops of histogram boosting, compiled with numba when it is installed.

Both implementations visit bins in the same order and keep the first split
whose gain beats the incumbent by more than a relative ``TIE`` margin, so
near-equal gains resolve to the smallest feature, then the smallest bin,
regardless of summation round-off.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

TIE = 1e-10


def _hist_numpy(codes, rows, g, h, n_bins):
    width = codes.shape[1]
    flat = codes[rows].ravel()
    G = np.bincount(flat, weights=np.repeat(g[rows], width), minlength=n_bins)
    H = np.bincount(flat, weights=np.repeat(h[rows], width), minlength=n_bins)
    C = np.bincount(flat, minlength=n_bins).astype(np.float64)
    return G, H, C


def _best_numpy(G, H, C, starts, g_tot, h_tot, c_tot, min_data, min_hess, lam):
    n_bins = len(G)
    d = len(starts) - 1
    feat_of = np.repeat(np.arange(d), np.diff(starts))
    out = []
    for arr in (G, H, C):
        cum = np.cumsum(arr)
        base = np.concatenate(([0.0], cum[starts[1:-1] - 1]))
        out.append(cum - base[feat_of])
    GL, HL, CL = out
    GR, HR, CR = g_tot - GL, h_tot - HL, c_tot - CL
    last = np.zeros(n_bins, dtype=bool)
    last[starts[1:] - 1] = True
    ok = ~last & (CL >= min_data) & (CR >= min_data) & (HL >= min_hess) & (HR >= min_hess)
    if not ok.any():
        return 0.0, -1, -1, 0.0, 0.0
    gain = np.full(n_bins, -np.inf)
    parent = g_tot * g_tot / (h_tot + lam)
    gain[ok] = 0.5 * (GL[ok] ** 2 / (HL[ok] + lam) + GR[ok] ** 2 / (HR[ok] + lam) - parent)
    top = gain.max()
    if not top > 0:
        return 0.0, -1, -1, 0.0, 0.0
    pos = int(np.flatnonzero(gain >= top - TIE * max(1.0, abs(top)))[0])
    if not gain[pos] > 0:
        return 0.0, -1, -1, 0.0, 0.0
    f = int(feat_of[pos])
    return float(gain[pos]), f, pos - int(starts[f]), float(GL[pos]), float(HL[pos])


if njit is not None:

    @njit(cache=True)
    def _hist_numba(codes, rows, g, h, n_bins):
        width = codes.shape[1]
        G = np.zeros(n_bins)
        H = np.zeros(n_bins)
        C = np.zeros(n_bins)
        for i in range(rows.shape[0]):
            r = rows[i]
            gr = g[r]
            hr = h[r]
            for j in range(width):
                b = codes[r, j]
                G[b] += gr
                H[b] += hr
                C[b] += 1.0
        return G, H, C

    @njit(cache=True)
    def _best_numba(G, H, C, starts, g_tot, h_tot, c_tot, min_data, min_hess, lam):
        parent = g_tot * g_tot / (h_tot + lam)
        best_gain = 0.0
        best_f = -1
        best_b = -1
        best_gl = 0.0
        best_hl = 0.0
        for f in range(starts.shape[0] - 1):
            gl = 0.0
            hl = 0.0
            cl = 0.0
            for pos in range(starts[f], starts[f + 1] - 1):
                gl += G[pos]
                hl += H[pos]
                cl += C[pos]
                cr = c_tot - cl
                hr = h_tot - hl
                if cl < min_data or cr < min_data or hl < min_hess or hr < min_hess:
                    continue
                gr = g_tot - gl
                gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
                if gain > best_gain + TIE * max(1.0, abs(best_gain)):
                    best_gain = gain
                    best_f = f
                    best_b = pos - starts[f]
                    best_gl = gl
                    best_hl = hl
        return best_gain, best_f, best_b, best_gl, best_hl

    build_histogram = _hist_numba
    best_bin_split = _best_numba
    HAVE_NUMBA = True
else:  # pragma: no cover
    build_histogram = _hist_numpy
    best_bin_split = _best_numpy
    HAVE_NUMBA = False
