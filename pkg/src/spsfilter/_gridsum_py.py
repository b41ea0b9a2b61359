"""Weighted sum of a path correlator over every tuple of a tensor grid.

numpy version of the compiled kernel, batched over tuples.  Vertex ``k`` runs
over grid levels ``0..N-1`` with weight ``weights[k, i]``; the result is
``sum over all index tuples of prod_k weights[k, i_k] * C(levels)`` where
``C`` is the path correlator.  Levels at or below ``i_T`` lie inside the pulse,
and ``U_on[mask, s]`` / ``U_off[mask, s]`` propagate block ``mask`` by ``s``
grid steps of the respective region (zero-padded to a common size ``D``).
``ins[mask * n + v]`` is the padded insertion map of vertex ``v``.
"""
from __future__ import annotations

import numpy as np

__all__ = ["grid_sum"]


def grid_sum(U_on, U_off, ins, dims, init, i_T, weights, chunk=20000) -> complex:
    weights = np.asarray(weights, dtype=complex)
    n, N = weights.shape
    D = U_on.shape[2]
    total = N ** n
    acc = 0.0j
    y0 = np.zeros(D, dtype=complex)
    y0[: dims[0]] = init
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.stack(np.unravel_index(flat, (N,) * n), axis=1)
        w = np.prod(weights[np.arange(n), idx], axis=1)
        keep = w != 0.0
        idx, w = idx[keep], w[keep]
        if not idx.size:
            continue
        # chronological order, ties by vertex id
        order = np.argsort(idx * n + np.arange(n), axis=1)
        M = idx.shape[0]
        rows = np.arange(M)
        y = np.repeat(y0[None, :], M, axis=0)
        mask = np.zeros(M, dtype=np.int64)
        lvl = np.zeros(M, dtype=np.int64)
        for s in range(n):
            v = order[:, s]
            t = idx[rows, v]
            on = np.minimum(t, i_T) - np.minimum(lvl, i_T)
            off = np.maximum(t, i_T) - np.maximum(lvl, i_T)
            y = np.einsum("mij,mj->mi", U_on[mask, on], y)
            y = np.einsum("mij,mj->mi", U_off[mask, off], y)
            y = np.einsum("mij,mj->mi", ins[mask * n + v], y)
            mask = mask | (1 << v)
            lvl = t
        acc += np.dot(w, y[:, 0])
    return complex(acc)
