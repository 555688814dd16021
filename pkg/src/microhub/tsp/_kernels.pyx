# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tour kernels.

Tours are int64 arrays of node indices into a square distance matrix with
the depot at index 0 and in position 0.  The pure-Python twins in
``_pykernels`` perform the same floating-point operations in the same
order, so both backends return identical tours.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double EPS = 1e-12


def nearest_neighbor(const double[:, ::1] dist):
    cdef Py_ssize_t n = dist.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tour = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] seen = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t pos, j, cur = 0, best_j
    cdef double best
    seen[0] = 1
    for pos in range(1, n):
        best_j = -1
        best = 0.0
        for j in range(1, n):
            if seen[j]:
                continue
            if best_j < 0 or dist[cur, j] < best:
                best = dist[cur, j]
                best_j = j
        tour[pos] = best_j
        seen[best_j] = 1
        cur = best_j
    return tour


def two_opt(const double[:, ::1] dist, cnp.int64_t[::1] tour):
    """Improve ``tour`` in place until no 2-exchange shortens it; returns the move count."""
    cdef Py_ssize_t L = tour.shape[0]
    cdef Py_ssize_t i, j, lo, hi
    cdef cnp.int64_t a, b, c, d, tmp
    cdef double delta
    cdef bint improved = True
    cdef long moves = 0
    if L < 4:
        return 0
    while improved:
        improved = False
        for i in range(L - 2):
            a = tour[i]
            b = tour[i + 1]
            for j in range(i + 2, L):
                c = tour[j]
                d = tour[(j + 1) % L]
                if d == a:
                    continue
                delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                if delta < -EPS:
                    lo = i + 1
                    hi = j
                    while lo < hi:
                        tmp = tour[lo]
                        tour[lo] = tour[hi]
                        tour[hi] = tmp
                        lo += 1
                        hi -= 1
                    b = tour[i + 1]
                    improved = True
                    moves += 1
    return moves


def tour_length(const double[:, ::1] dist, const cnp.int64_t[::1] tour):
    cdef Py_ssize_t L = tour.shape[0]
    cdef Py_ssize_t i
    cdef double total = 0.0
    if L < 2:
        return 0.0
    for i in range(L - 1):
        total += dist[tour[i], tour[i + 1]]
    total += dist[tour[L - 1], tour[0]]
    return total
