# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for the Monte Carlo harness.

Both kernels consume normal variates in exactly the order used by
:mod:`chisup._kernels_py` (path, then component, then time step), so a
given generator state yields bit-identical statistics on either backend.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()


def bm_chi_stats(rng, Py_ssize_t n_paths, const double[::1] incr_sd, bridge_t,
                 const double[::1] b2, const double[:, ::1] weights,
                 const Py_ssize_t[:, ::1] segments):
    """Fused Brownian synthesis and segment maxima of the weighted chi-square field.

    See :func:`chisup._kernels_py.bm_chi_stats` for the argument contract.
    """
    cdef Py_ssize_t n_comp = b2.shape[0]
    cdef Py_ssize_t n_inc = incr_sd.shape[0]
    cdef Py_ssize_t n_stat = segments.shape[0]
    cdef bint bridge = bridge_t is not None
    cdef Py_ssize_t n_grid = n_inc - 1 if bridge else n_inc
    cdef const double[::1] tt
    if bridge:
        tt = np.ascontiguousarray(bridge_t, dtype=np.float64)
        if tt.shape[0] != n_grid:
            raise ValueError("bridge_t must have one entry per grid point")
    if weights.shape[0] != n_stat or weights.shape[1] != n_grid:
        raise ValueError("weights must have shape (n_stat, n_grid)")

    out = np.empty((n_paths, n_stat), dtype=np.float64)
    cdef double[:, ::1] res = out
    chi_arr = np.empty(n_grid, dtype=np.float64)
    w_arr = np.empty(n_grid, dtype=np.float64)
    cdef double[::1] chi = chi_arr
    cdef double[::1] wpath = w_arr

    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    cdef bitgen_t *state = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef Py_ssize_t p, i, j, s, lo, hi
    cdef double acc, x, w1, bi, m, v
    with rng.bit_generator.lock, nogil:
        for p in range(n_paths):
            for i in range(n_comp):
                bi = b2[i]
                acc = 0.0
                for j in range(n_grid):
                    acc = acc + random_standard_normal(state) * incr_sd[j]
                    wpath[j] = acc
                if bridge:
                    w1 = acc + random_standard_normal(state) * incr_sd[n_grid]
                    for j in range(n_grid):
                        x = wpath[j] - tt[j] * w1
                        wpath[j] = x
                for j in range(n_grid):
                    x = wpath[j]
                    if i == 0:
                        chi[j] = bi * (x * x)
                    else:
                        chi[j] = chi[j] + bi * (x * x)
            for s in range(n_stat):
                lo = segments[s, 0]
                hi = segments[s, 1]
                m = chi[lo] * weights[s, lo]
                for j in range(lo + 1, hi):
                    v = chi[j] * weights[s, j]
                    if v > m:
                        m = v
                res[p, s] = m
    return out


def chi_stats(const double[:, :, ::1] values, const double[::1] b2, const double[:, ::1] weights,
              const Py_ssize_t[:, ::1] segments):
    """Segment maxima of the weighted chi-square field for precomputed paths."""
    cdef Py_ssize_t n_comp = values.shape[0]
    cdef Py_ssize_t n_paths = values.shape[1]
    cdef Py_ssize_t n_grid = values.shape[2]
    cdef Py_ssize_t n_stat = segments.shape[0]
    if b2.shape[0] != n_comp:
        raise ValueError("b2 length must equal the number of components")
    if weights.shape[0] != n_stat or weights.shape[1] != n_grid:
        raise ValueError("weights must have shape (n_stat, n_grid)")
    out = np.empty((n_paths, n_stat), dtype=np.float64)
    cdef double[:, ::1] res = out
    chi_arr = np.empty(n_grid, dtype=np.float64)
    cdef double[::1] chi = chi_arr
    cdef Py_ssize_t p, i, j, s, lo, hi
    cdef double x, m, v
    with nogil:
        for p in range(n_paths):
            for j in range(n_grid):
                x = values[0, p, j]
                chi[j] = b2[0] * (x * x)
            for i in range(1, n_comp):
                for j in range(n_grid):
                    x = values[i, p, j]
                    chi[j] = chi[j] + b2[i] * (x * x)
            for s in range(n_stat):
                lo = segments[s, 0]
                hi = segments[s, 1]
                m = chi[lo] * weights[s, lo]
                for j in range(lo + 1, hi):
                    v = chi[j] * weights[s, j]
                    if v > m:
                        m = v
                res[p, s] = m
    return out
