# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for atom bookkeeping.

Same signatures and results as :mod:`probfw._kernels_py`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def sweep_labels(const double[:, ::1] pts, double tol):
    """Greedy cluster labels for points already sorted by first coordinate."""
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t d = pts.shape[1]
    cdef cnp.int64_t[::1] labels = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] reps = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t n_reps = 0
    cdef Py_ssize_t i, j, c, r
    cdef double acc, diff, tol2 = tol * tol
    cdef bint found
    for i in range(n):
        found = False
        c = n_reps - 1
        while c >= 0:
            r = reps[c]
            if pts[i, 0] - pts[r, 0] > tol:
                break
            acc = 0.0
            for j in range(d):
                diff = pts[i, j] - pts[r, j]
                acc += diff * diff
            if acc <= tol2:
                labels[i] = c
                found = True
                break
            c -= 1
        if not found:
            reps[n_reps] = i
            labels[i] = n_reps
            n_reps += 1
    return np.asarray(labels)


def ball_mass_table(const double[:, ::1] atoms, const double[::1] weights,
                    const double[:, ::1] centers, const double[::1] radii):
    """Closed-ball masses, shape (n_centers, n_radii)."""
    cdef Py_ssize_t n = atoms.shape[0]
    cdef Py_ssize_t d = atoms.shape[1]
    cdef Py_ssize_t p = centers.shape[0]
    cdef Py_ssize_t q = radii.shape[0]
    out = np.zeros((p, q), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double[::1] dist = np.empty(n, dtype=np.float64)
    cdef double[::1] cum = np.empty(n + 1, dtype=np.float64)
    cdef cnp.int64_t[::1] order
    cdef Py_ssize_t a, b, j, k, lo, hi, mid
    cdef double acc, diff, r
    for a in range(p):
        for b in range(n):
            acc = 0.0
            for j in range(d):
                diff = atoms[b, j] - centers[a, j]
                acc += diff * diff
            dist[b] = sqrt(acc)
        order = np.argsort(np.asarray(dist), kind="stable")
        cum[0] = 0.0
        for b in range(n):
            cum[b + 1] = cum[b] + weights[order[b]]
        for k in range(q):
            r = radii[k]
            # count of sorted distances <= r
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if dist[order[mid]] <= r:
                    lo = mid + 1
                else:
                    hi = mid
            res[a, k] = cum[lo]
    return out
