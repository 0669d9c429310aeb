"""Pure-numpy reference implementation of the harness kernels.

Used when the compiled extension is unavailable, and as the oracle the
compiled kernels are checked against bit for bit.
"""
from __future__ import annotations

import numpy as np

# doubles per generated chunk; bounds peak memory of the fallback
_CHUNK_DOUBLES = 1 << 22


def _segment_max(chi: np.ndarray, weights: np.ndarray, segments: np.ndarray) -> np.ndarray:
    out = np.empty((chi.shape[0], segments.shape[0]))
    for s, (lo, hi) in enumerate(segments):
        out[:, s] = (chi[:, lo:hi] * weights[s, lo:hi]).max(axis=1)
    return out


def bm_chi_stats(rng, n_paths, incr_sd, bridge_t, b2, weights, segments):
    """Segment maxima of ``sum_i b2[i] X_i(t)^2 * weights[s, t]`` for Brownian-type X.

    Parameters
    ----------
    rng : numpy.random.Generator
        Source of standard normals; consumed path by path, component by
        component, step by step.
    n_paths : int
        Number of independent realizations.
    incr_sd : ndarray, shape (n_inc,)
        Standard deviations of the successive Brownian increments. For a
        bridge the last entry is the increment from the final grid point
        to time 1.
    bridge_t : ndarray or None
        Grid times; when given, paths are pinned as ``W(t) - t W(1)``.
    b2 : ndarray, shape (n_comp,)
        Squared coefficients of the chi-square sum.
    weights : ndarray, shape (n_stat, n_grid)
        Per-statistic multipliers applied to the chi-square values.
    segments : ndarray of int, shape (n_stat, 2)
        Half-open index ranges ``[lo, hi)`` over which each maximum runs.

    Returns
    -------
    ndarray, shape (n_paths, n_stat)
    """
    incr_sd = np.asarray(incr_sd, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    segments = np.asarray(segments, dtype=np.intp)
    n_comp = b2.shape[0]
    n_inc = incr_sd.shape[0]
    bridge = bridge_t is not None
    n_grid = n_inc - 1 if bridge else n_inc
    if bridge:
        tt = np.asarray(bridge_t, dtype=np.float64)
        if tt.shape[0] != n_grid:
            raise ValueError("bridge_t must have one entry per grid point")
    if weights.shape != (segments.shape[0], n_grid):
        raise ValueError("weights must have shape (n_stat, n_grid)")

    out = np.empty((n_paths, segments.shape[0]))
    chunk = max(1, _CHUNK_DOUBLES // (n_comp * n_inc))
    for start in range(0, n_paths, chunk):
        m = min(chunk, n_paths - start)
        z = rng.standard_normal((m, n_comp, n_inc))
        z *= incr_sd
        np.cumsum(z, axis=2, out=z)
        if bridge:
            x = z[:, :, :n_grid] - tt * z[:, :, n_grid:]
        else:
            x = z
        chi = b2[0] * (x[:, 0, :] * x[:, 0, :])
        for i in range(1, n_comp):
            chi += b2[i] * (x[:, i, :] * x[:, i, :])
        out[start:start + m] = _segment_max(chi, weights, segments)
    return out


def chi_stats(values, b2, weights, segments):
    """Segment maxima of the weighted chi-square field for precomputed paths.

    ``values`` has shape (n_comp, n_paths, n_grid); other arguments as in
    :func:`bm_chi_stats`.
    """
    values = np.asarray(values, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    segments = np.asarray(segments, dtype=np.intp)
    if b2.shape[0] != values.shape[0]:
        raise ValueError("b2 length must equal the number of components")
    if weights.shape != (segments.shape[0], values.shape[2]):
        raise ValueError("weights must have shape (n_stat, n_grid)")
    chi = b2[0] * (values[0] * values[0])
    for i in range(1, values.shape[0]):
        chi += b2[i] * (values[i] * values[i])
    return _segment_max(chi, weights, segments)
