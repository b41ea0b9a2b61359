"""Generalized quantum regression on closed time paths.

A correlator ``<A_n(t_n) ... A_1(t_1)>`` of Heisenberg operators is read as a
closed path on the time axis: start at ``t = 0`` on the initial state, visit
``t_1, ..., t_n`` in product order (rightmost operator first), and return to
``t = 0`` where the trace closes the loop.

Slicing the path at a level ``s`` cuts it into *strands* (up or down
crossings) and *runs* (maximal pieces of the loop lying below ``s``).  The
part of the loop below ``s`` is a tensor with one matrix (row, col) pair per
run: the row index sits on the strand leaving the run upwards, the column
index on the strand entering it from above.  Unimodal time orders give one
run, i.e. an ordinary density-matrix-like object, and the propagator is the
Lindbladian.  Out-of-time-order tuples give two runs and a propagator on the
doubled space.

Each dissipator ``J`` is treated as a vacuum white-noise channel shared by all
strands crossing a level.  Contracting one noise bin yields the generator::

    sum_i  -1/2 (J^+ J)_i  +  sum_{i > j}  -eps_i eps_j (J^+)_i (J)_j

with strands ``i, j`` taken in path order and ``eps = +1`` for up crossings,
``-1`` for down crossings.  ``(M)_i`` acts on the run index attached to
strand ``i``: by left multiplication on an up strand, right multiplication on
a down strand.  With a single pair of strands this is the Lindbladian.

States are indexed by the set (bit mask) of vertices already below the level,
so the same tables drive pointwise correlators and the ordered-time integrals
in :mod:`spsfilter.integrate`.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .liouville import NUMBER, SIGMA, SIGMA_DAG, RateSet

__all__ = ["PathSystem", "PathTables", "tables_for", "channels_for"]


@dataclass(frozen=True)
class PathSystem:
    """Closed path(s) through a set of vertices.

    Parameters
    ----------
    loops : tuple of tuple of int
        Vertex ids of each loop in path order, i.e. the operator nearest the
        initial state first. Independent loops are independent copies of the
        emitter (products of expectation values).
    ops : tuple of str
        Operator label per vertex id: ``"s"`` (sigma), ``"sd"`` (sigma
        dagger), ``"n"`` (population) or ``""`` for dummy vertices that carry no operator.
    """

    loops: tuple
    ops: tuple

    def __post_init__(self):
        seen = [v for loop in self.loops for v in loop]
        if len(set(seen)) != len(seen):
            raise ValueError("a vertex may appear in one loop only")
        for v in range(len(self.ops)):
            if (self.ops[v] != "") != (v in seen):
                raise ValueError(f"vertex {v}: operator/loop membership mismatch")

    @property
    def n_vertices(self) -> int:
        return len(self.ops)

    @property
    def full_mask(self) -> int:
        return (1 << self.n_vertices) - 1


_OPS = {"s": SIGMA, "sd": SIGMA_DAG, "n": NUMBER}


def channels_for(rates: RateSet, pump_on: bool):
    """Jump operators with their rates; zero-rate channels are dropped."""
    chans = [(SIGMA, rates.gamma_diss), (NUMBER, rates.gamma_deph)]
    if pump_on:
        chans.append((SIGMA_DAG, rates.gamma_pump))
    return [(J, g) for J, g in chans if g > 0.0]


def _runs(below: list[bool]) -> list[tuple]:
    """Maximal cyclic runs of below-level positions, canonical order.

    Position 0 (the initial state) is always below. Each run is a tuple of
    positions in path order; ``run[0]`` is the entry, ``run[-1]`` the exit.
    The run holding position 0 comes first, the others by entry position.
    """
    m = len(below)
    if all(below):
        return []
    # rotate so that we start right after an above position
    start = next(i for i in range(m) if not below[i]) + 1
    runs, cur = [], []
    for k in range(m):
        pos = (start + k) % m
        if below[pos]:
            cur.append(pos)
        elif cur:
            runs.append(tuple(cur))
            cur = []
    if cur:
        runs.append(tuple(cur))
    rho_run = next(r for r in runs if 0 in r)
    others = sorted((r for r in runs if r is not rho_run), key=lambda r: r[0])
    return [rho_run] + others


@dataclass
class _Layout:
    # per loop: list of runs; axes are (row, col) per run, loops in order
    runs: list
    offsets: list  # first axis index of each loop
    n_axes: int

    @property
    def dim(self) -> int:
        return 2 ** self.n_axes


class PathTables:
    """Block generators and insertion maps for a path system and rate set.

    Attributes
    ----------
    dims : dict[int, int]
        Block dimension per vertex mask.
    gen_on, gen_off : dict[int, ndarray]
        Generators with the pump on / off.
    insert : dict[tuple[int, int], ndarray]
        ``insert[mask, v]`` maps block ``mask`` to block ``mask | 1 << v``.
    initial : ndarray
        State of the empty mask (ground state on every loop).
    """

    def __init__(self, system: PathSystem, rates: RateSet):
        self.system = system
        self.rates = rates
        self._loop_of = {}
        for li, loop in enumerate(system.loops):
            for pos, v in enumerate(loop, start=1):
                self._loop_of[v] = (li, pos)
        masks = range(1 << system.n_vertices)
        self.layouts = {m: self._layout(m) for m in masks}
        self.dims = {m: lay.dim for m, lay in self.layouts.items()}
        chan_on = channels_for(rates, True)
        chan_off = channels_for(rates, False)
        self.gen_on = {m: self._generator(m, chan_on) for m in masks}
        self.gen_off = {m: self._generator(m, chan_off) for m in masks}
        self.insert = {}
        for m in masks:
            for v in range(system.n_vertices):
                if not m >> v & 1:
                    self.insert[m, v] = self._insertion(m, v)
        init = np.ones(1, dtype=complex)
        for _ in system.loops:
            init = np.kron(init, np.array([1.0, 0.0, 0.0, 0.0], dtype=complex))
        self.initial = init
        for arr in itertools.chain(self.gen_on.values(), self.gen_off.values(),
                                   self.insert.values(), [self.initial]):
            arr.setflags(write=False)

    # -- structure ---------------------------------------------------------
    def _below(self, mask: int, loop: tuple) -> list[bool]:
        return [True] + [bool(mask >> v & 1) for v in loop]

    def _layout(self, mask: int) -> _Layout:
        runs, offsets, n = [], [], 0
        for loop in self.system.loops:
            r = _runs(self._below(mask, loop))
            runs.append(r)
            offsets.append(n)
            n += 2 * len(r)
        return _Layout(runs, offsets, n)

    def _strands(self, mask: int, li: int):
        """Strands of loop ``li`` in path order: (eps, axis, is_row)."""
        loop = self.system.loops[li]
        below = self._below(mask, loop)
        lay = self.layouts[mask]
        runs = lay.runs[li]
        m = len(below)
        out = []
        for i in range(m):
            a, b = below[i], below[(i + 1) % m]
            if a and not b:
                k = next(j for j, r in enumerate(runs) if r[-1] == i)
                out.append((+1, lay.offsets[li] + 2 * k, True))
            elif b and not a:
                k = next(j for j, r in enumerate(runs) if r[0] == (i + 1) % m)
                out.append((-1, lay.offsets[li] + 2 * k + 1, False))
        return out

    # -- tensor helpers ----------------------------------------------------
    @staticmethod
    def _apply(tensor: np.ndarray, axis: int, op: np.ndarray, is_row: bool) -> np.ndarray:
        # tensor carries a leading batch axis
        mat = op if is_row else op.T
        out = np.tensordot(mat, tensor, axes=([1], [axis + 1]))
        return np.moveaxis(out, 0, axis + 1)

    def _generator(self, mask: int, channels) -> np.ndarray:
        lay = self.layouts[mask]
        dim = lay.dim
        basis = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * lay.n_axes)
        acc = np.zeros_like(basis)
        for li in range(len(self.system.loops)):
            strands = self._strands(mask, li)
            for J, rate in channels:
                Jd = J.conj().T
                JdJ = Jd @ J
                for i, (eps_i, ax_i, row_i) in enumerate(strands):
                    acc -= 0.5 * rate * self._apply(basis, ax_i, JdJ, row_i)
                    for j in range(i):
                        eps_j, ax_j, row_j = strands[j]
                        term = self._apply(basis, ax_j, J, row_j)
                        term = self._apply(term, ax_i, Jd, row_i)
                        acc -= eps_i * eps_j * rate * term
        return np.ascontiguousarray(acc.reshape(dim, dim).T)

    def _insertion(self, mask: int, v: int) -> np.ndarray:
        lay = self.layouts[mask]
        new_mask = mask | 1 << v
        new_lay = self.layouts[new_mask]
        dim, new_dim = lay.dim, new_lay.dim
        if self.system.ops[v] == "":
            if dim != new_dim:
                raise AssertionError("dummy vertex changed the strand layout")
            return np.eye(dim, dtype=complex)
        li, pos = self._loop_of[v]
        op = _OPS[self.system.ops[v]]
        loop = self.system.loops[li]
        m = len(loop) + 1
        below = self._below(mask, loop)
        prev_below, next_below = below[pos - 1], below[(pos + 1) % m]

        batch = 0
        labels = list(range(1, lay.n_axes + 1))
        fresh = itertools.count(lay.n_axes + 1)
        old_runs = lay.runs[li]
        off = lay.offsets[li]

        def old_row(exit_pos):
            k = next(j for j, r in enumerate(old_runs) if r[-1] == exit_pos)
            return labels[off + 2 * k]

        def old_col(entry_pos):
            k = next(j for j, r in enumerate(old_runs) if r[0] == entry_pos)
            return labels[off + 2 * k + 1]

        y = old_row(pos - 1) if prev_below else next(fresh)
        x = old_col((pos + 1) % m) if next_below else next(fresh)

        out_labels = []
        for lj in range(len(self.system.loops)):
            if lj != li:
                o_old = lay.offsets[lj]
                n_ax = 2 * len(new_lay.runs[lj])
                out_labels.extend(labels[o_old:o_old + n_ax])
                continue
            for run in new_lay.runs[li]:
                out_labels.append(x if run[-1] == pos else old_row(run[-1]))
                out_labels.append(y if run[0] == pos else old_col(run[0]))
        basis = np.eye(dim, dtype=complex).reshape((dim,) + (2,) * lay.n_axes)
        out = np.einsum(basis, [batch] + labels, op, [x, y], [batch] + out_labels)
        return np.ascontiguousarray(out.reshape(dim, new_dim).T)

    # -- pointwise evaluation ---------------------------------------------
    def value(self, times) -> complex:
        """Correlator for vertex times ``times[v]`` (all vertices, no dummies).

        Vertices sharing a time are inserted with no evolution in between,
        in vertex-id order.
        """
        times = [float(t) for t in times]
        if len(times) != self.system.n_vertices:
            raise ValueError("one time per vertex expected")
        if any(t < 0.0 for t in times):
            raise ValueError("times must be >= 0")
        order = sorted(range(len(times)), key=lambda v: (times[v], v))
        y = self.initial
        mask, level = 0, 0.0
        for v in order:
            y = self.evolve(mask, y, level, times[v])
            y = self.insert[mask, v] @ y
            mask |= 1 << v
            level = times[v]
        return complex(y[0])

    def evolve(self, mask: int, y: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Propagate a block state from level ``t0`` to ``t1`` across the pulse edge."""
        T = self.rates.pulse_T
        if t1 <= t0:
            return y
        on = max(0.0, min(t1, T) - t0)
        off = t1 - max(t0, T) if t1 > T else 0.0
        if on > 0.0:
            y = _expm_cached(self, mask, True, on) @ y
        if off > 0.0:
            y = _expm_cached(self, mask, False, off) @ y
        return y


def _expm_cached(tables: PathTables, mask: int, pump_on: bool, dt: float) -> np.ndarray:
    # propagators are reused heavily on quadrature grids
    cache = tables.__dict__.setdefault("_prop_cache", {})
    key = (mask, pump_on, dt)
    U = cache.get(key)
    if U is None:
        gen = tables.gen_on[mask] if pump_on else tables.gen_off[mask]
        U = scipy.linalg.expm(gen * dt)
        if len(cache) > 200000:
            cache.clear()
        cache[key] = U
    return U


@functools.lru_cache(maxsize=256)
def tables_for(system: PathSystem, rates: RateSet) -> PathTables:
    return PathTables(system, rates)
