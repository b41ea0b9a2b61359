# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Weighted sum of a path correlator over every tuple of a tensor grid.

See :mod:`spsfilter._gridsum_py` for the reference implementation and the
meaning of the arguments.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def grid_sum(const double complex[:, :, :, :] U_on,
             const double complex[:, :, :, :] U_off,
             const double complex[:, :, :] ins,
             const long[:] dims,
             const double complex[:] init,
             long i_T,
             const double complex[:, :] weights):
    cdef Py_ssize_t n = weights.shape[0]
    cdef Py_ssize_t N = weights.shape[1]
    cdef Py_ssize_t D = U_on.shape[2]
    cdef Py_ssize_t total = 1
    cdef Py_ssize_t k
    for k in range(n):
        total *= N

    cdef long[8] idx
    cdef long[8] order
    cdef double complex[64] y
    cdef double complex[64] z
    cdef double complex acc = 0.0, w
    cdef Py_ssize_t flat, rem, s, a, b, i, j, v, mask, d, d2
    cdef long lvl, lo, hi, on_steps, off_steps

    if n > 8 or D > 64:
        raise ValueError("grid_sum supports at most 8 vertices and block size 64")

    with nogil:
        for flat in range(total):
            rem = flat
            w = 1.0
            for k in range(n - 1, -1, -1):
                idx[k] = rem % N
                rem = rem // N
                w = w * weights[k, idx[k]]
            if w == 0.0:
                continue
            # chronological order, ties by vertex id (insertion sort)
            for k in range(n):
                order[k] = k
            for a in range(1, n):
                v = order[a]
                b = a - 1
                while b >= 0 and (idx[order[b]] > idx[v] or
                                  (idx[order[b]] == idx[v] and order[b] > v)):
                    order[b + 1] = order[b]
                    b -= 1
                order[b + 1] = v

            d = dims[0]
            for i in range(d):
                y[i] = init[i]
            mask = 0
            lvl = 0
            for s in range(n):
                v = order[s]
                lo = lvl if lvl < i_T else i_T
                hi = idx[v] if idx[v] < i_T else i_T
                on_steps = hi - lo
                lo = lvl if lvl > i_T else i_T
                hi = idx[v] if idx[v] > i_T else i_T
                off_steps = hi - lo
                if on_steps > 0:
                    for i in range(d):
                        z[i] = 0.0
                        for j in range(d):
                            z[i] = z[i] + U_on[mask, on_steps, i, j] * y[j]
                    for i in range(d):
                        y[i] = z[i]
                if off_steps > 0:
                    for i in range(d):
                        z[i] = 0.0
                        for j in range(d):
                            z[i] = z[i] + U_off[mask, off_steps, i, j] * y[j]
                    for i in range(d):
                        y[i] = z[i]
                d2 = dims[mask | (1 << v)]
                for i in range(d2):
                    z[i] = 0.0
                    for j in range(d):
                        z[i] = z[i] + ins[mask * n + v, i, j] * y[j]
                for i in range(d2):
                    y[i] = z[i]
                d = d2
                mask = mask | (1 << v)
                lvl = idx[v]
            acc = acc + w * y[0]
    return complex(acc)
