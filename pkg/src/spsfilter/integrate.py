"""Integrals of path correlators over all time orderings.

An integrand is a correlator from :mod:`spsfilter.paths` times exponential
kernels in the vertex times.  Every exponential kernel factor can be written
as ``exp(sum over levels of a rate that depends on which vertices lie below
the level)``, so within a segment of levels it is a scalar shift of the block
generator.  Integrating each vertex time over a segment then turns into a
linear ODE on the direct sum of all blocks, with insertion maps coupling
block ``S`` to ``S | v``.  Two evaluators share this description:

``evaluate_expm``
    One block-triangular matrix exponential per segment (exact up to the
    exponential routine; all orderings at once), sub-stepped so that no
    single exponential has a large norm.
``evaluate_gauss``
    Gauss-Legendre product integration of the same ODE in its integral form,
    using only exponentials of the individual diagonal blocks, plus a
    tensor-product rule per gap for an open tail (gaps after the last edge
    are independent).  Each block is first split into the strongly connected
    pieces of its coupling graph, so a decoupled small component is never
    mixed with large ones through a shared eigenbasis.
"""
from __future__ import annotations

import graphlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from .paths import PathSystem, PathTables

__all__ = ["Segment", "OrderedIntegral", "evaluate_expm", "evaluate_gauss",
           "reachable_masks", "graded_tail_rule"]


def _no_shift(mask: int) -> complex:
    return 0.0


@dataclass(frozen=True)
class Segment:
    """Levels ``[start, end]`` with a fixed generator and fixed kernel shifts."""

    start: float
    end: float
    pump_on: bool
    insertable: frozenset
    shift: Callable[[int], complex] = _no_shift


@dataclass(frozen=True)
class OrderedIntegral:
    """Integral over all vertex times of ``prefactor * kernel * correlator``.

    ``allowed(mask, v)`` can forbid inserting ``v`` on top of ``mask`` (used
    for causal orderings between dummy detection vertices and operators).
    With ``open_tail`` the last segment stands for ``[start, infinity)``
    truncated at ``end``.
    """

    system: PathSystem
    segments: tuple
    prefactor: complex = 1.0
    allowed: Callable[[int, int], bool] | None = None
    open_tail: bool = False

    def can_insert(self, mask: int, v: int, seg: Segment) -> bool:
        if mask >> v & 1 or v not in seg.insertable:
            return False
        return self.allowed is None or self.allowed(mask, v)


def reachable_masks(spec: OrderedIntegral) -> list[int]:
    seen = {0}
    frontier = [0]
    n = spec.system.n_vertices
    while frontier:
        nxt = []
        for m in frontier:
            for seg in spec.segments:
                for v in range(n):
                    if spec.can_insert(m, v, seg):
                        m2 = m | 1 << v
                        if m2 not in seen:
                            seen.add(m2)
                            nxt.append(m2)
        frontier = nxt
    return sorted(seen, key=lambda m: (bin(m).count("1"), m))


_MAX_STEP_NORM = 4.0


def evaluate_expm(tables: PathTables, spec: OrderedIntegral) -> complex:
    """Fast path: exact block-triangular exponential per segment."""
    masks = reachable_masks(spec)
    full = spec.system.full_mask
    if full not in masks:
        return 0.0j
    offs, n = {}, 0
    for m in masks:
        offs[m] = n
        n += tables.dims[m]
    y = np.zeros(n, dtype=complex)
    y[offs[0]:offs[0] + tables.dims[0]] = tables.initial
    for seg in spec.segments:
        length = seg.end - seg.start
        if length <= 0.0:
            continue
        gens = tables.gen_on if seg.pump_on else tables.gen_off
        A = np.zeros((n, n), dtype=complex)
        for m in masks:
            o, d = offs[m], tables.dims[m]
            A[o:o + d, o:o + d] = gens[m]
            A[o:o + d, o:o + d] += seg.shift(m) * np.eye(d)
            for v in range(spec.system.n_vertices):
                if spec.can_insert(m, v, seg):
                    m2 = m | 1 << v
                    o2, d2 = offs[m2], tables.dims[m2]
                    A[o2:o2 + d2, o:o + d] += tables.insert[m, v]
        # equal sub-steps keep ||A h|| moderate; one long step loses digits
        steps = max(1, int(np.ceil(np.linalg.norm(A, 1) * length / _MAX_STEP_NORM)))
        U = scipy.linalg.expm(A * (length / steps))
        for _ in range(steps):
            y = U @ y
    return complex(spec.prefactor * y[offs[full]])


# -- quadrature reference ---------------------------------------------------

def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def graded_tail_rule(first: float, length: float, n: int, ratio: float = 4.0,
                     widest: float = np.inf):
    """Composite Gauss-Legendre rule on [0, length], refined towards 0.

    Panel widths grow by ``ratio`` from ``first`` up to at most ``widest``.
    """
    pts = [0.0]
    w = min(first, widest)
    while pts[-1] + w < length:
        pts.append(pts[-1] + w)
        w = min(w * ratio, widest)
    pts.append(length)
    xs, ws = _gl(n)
    nodes, weights = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        nodes.append(a + (b - a) * xs)
        weights.append((b - a) * ws)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class _Eig:
    lam: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray | None
    A: np.ndarray

    def propagate(self, h: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Rows of ``states`` propagated by ``expm(A h_i)``."""
        if self.Vinv is not None:
            coef = states @ self.Vinv.T
            return (coef * np.exp(np.outer(h, self.lam))) @ self.V.T
        # defective block: batched exact exponentials, chunked to bound memory
        out = np.empty_like(states)
        for k in range(0, h.size, 4096):
            U = scipy.linalg.expm(self.A[None] * h[k:k + 4096, None, None])
            out[k:k + 4096] = np.einsum("nij,nj->ni", U, states[k:k + 4096])
        return out

    def integrated(self, h: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``sum_q w_q expm(A h_q)``."""
        if self.Vinv is not None:
            diag = np.exp(np.outer(h, self.lam)).T @ w
            return (self.V * diag) @ self.Vinv
        return sum(wq * scipy.linalg.expm(self.A * hq) for hq, wq in zip(h, w))


def _eig(A: np.ndarray, cond_max: float = 1e8) -> _Eig:
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) > cond_max:
        return _Eig(lam, V, None, A)
    return _Eig(lam, V, np.linalg.inv(V), A)


@dataclass
class _Unit:
    """A strongly connected piece of one block generator."""

    idx: np.ndarray
    eig: _Eig
    feeds: list  # (index array of an earlier piece, coupling matrix)


def _pieces(A: np.ndarray) -> list[np.ndarray]:
    """Index sets of the strongly connected components of ``A``'s graph, in
    an order where every piece only receives from earlier ones."""
    d = A.shape[0]
    graph = scipy.sparse.csr_matrix(np.abs(A.T) > 0.0)
    k, label = scipy.sparse.csgraph.connected_components(graph, directed=True, connection="strong")
    deps = {c: set() for c in range(k)}
    rows, cols = np.nonzero(A)
    for i, j in zip(rows, cols):
        if label[i] != label[j]:
            deps[label[i]].add(label[j])
    order = graphlib.TopologicalSorter(deps).static_order()
    return [np.flatnonzero(label == c) for c in order] if d else []


class _SegmentOps:
    # Each block generator is split into strongly connected pieces in the
    # Liouville basis.  Entries that evolve on their own then never pick up
    # rounding from large neighbours through a dense eigenbasis.
    def __init__(self, tables: PathTables, spec: OrderedIntegral, seg: Segment, masks):
        self.tables, self.spec, self.seg = tables, spec, seg
        gens = tables.gen_on if seg.pump_on else tables.gen_off
        self.units = {}
        rate, decays = 0.0, []
        for m in masks:
            A = gens[m] + seg.shift(m) * np.eye(tables.dims[m])
            units = []
            for idx in _pieces(A):
                e = _eig(A[np.ix_(idx, idx)])
                feeds = [(u.idx, A[np.ix_(idx, u.idx)]) for u in units
                         if np.any(A[np.ix_(idx, u.idx)])]
                units.append(_Unit(idx, e, feeds))
                rate = max(rate, float(np.max(np.abs(e.lam))))
                decays += [float(-l.real) for l in e.lam if -l.real > 1e-12]
            self.units[m] = units
        self.rate = rate
        self.slowest = min(decays, default=1.0)


def evaluate_gauss(tables: PathTables, spec: OrderedIntegral, nodes: int = 10,
                   ratio: float = 4.0, grading: float = 0.5) -> complex:
    """Reference path: Gauss-Legendre product integration.

    Within a finite segment the state of every block is collocated on a
    composite Gauss-Legendre mesh that is geometrically refined towards the
    segment start (the only place where block states have a boundary layer).
    The coupling integral ``int exp(A_S (u - s)) g_S(s) ds`` is evaluated at
    every node with sub-rules graded towards ``s = u``, interpolating the
    source ``g_S`` (built from lower blocks) with the Lagrange polynomial of
    each panel.  An open tail is done by a tensor rule per gap.

    Parameters
    ----------
    nodes : int
        Gauss-Legendre nodes per panel.
    ratio : float
        Growth factor of the graded sub-rules.
    grading : float
        Width of the first panel in units of the fastest block time scale.
    """
    masks = reachable_masks(spec)
    full = spec.system.full_mask
    if full not in masks:
        return 0.0j
    state = {0: tables.initial.copy()}
    segs = [s for s in spec.segments if s.end > s.start]
    for k, seg in enumerate(segs):
        ops = _SegmentOps(tables, spec, seg, masks)
        if spec.open_tail and k == len(segs) - 1:
            return complex(spec.prefactor * _open_tail(ops, state, masks, full, nodes, ratio, grading))
        state = _sweep(ops, masks, state, nodes, ratio, grading)
    return complex(spec.prefactor * state.get(full, np.zeros(1))[0])


def _panel_edges(a: float, b: float, first: float, widest: float = np.inf) -> np.ndarray:
    # panel widths double away from the segment start, up to ``widest``
    edges = [a]
    w = first
    while edges[-1] + 1.5 * w < b:
        edges.append(edges[-1] + w)
        w = min(2.0 * w, widest)
    edges.append(b)
    return np.array(edges)


def _graded_toward_end(lo: float, hi: float, first: float, xs, ws, ratio: float):
    """Composite rule on [lo, hi] refined towards ``hi``."""
    cuts = [hi]
    w = first
    while cuts[-1] - lo > 1.5 * w:
        cuts.append(cuts[-1] - w)
        w *= ratio
    cuts.append(lo)
    cuts = np.array(cuts[::-1])
    widths = np.diff(cuts)
    pts = (cuts[:-1, None] + widths[:, None] * xs[None, :]).ravel()
    wts = (widths[:, None] * ws[None, :]).ravel()
    return pts, wts


def _bary(x_nodes: np.ndarray, bw: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lagrange interpolation matrix from ``x_nodes`` to points ``y``."""
    diff = y[:, None] - x_nodes[None, :]
    exact = np.isclose(diff, 0.0, rtol=0.0, atol=1e-15 * max(1.0, np.max(np.abs(x_nodes))))
    diff[exact] = 1.0
    t = bw[None, :] / diff
    L = t / t.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        L[rows] = exact[rows].astype(float)
    return L


class _Mesh:
    """Collocation nodes, targets and product-rule points of one segment."""

    def __init__(self, a: float, b: float, rate: float, nodes: int, ratio: float, grading: float,
                 widest: float = np.inf):
        xs, ws = _gl(nodes)
        first = grading / max(rate, 1e-300)
        self.edges = _panel_edges(a, b, first, widest)
        P = len(self.edges) - 1
        widths = np.diff(self.edges)
        self.nodes = (self.edges[:-1, None] + widths[:, None] * xs[None, :]).ravel()
        bw = np.array([1.0 / np.prod([xs[i] - xs[j] for j in range(nodes) if j != i])
                       for i in range(nodes)])
        self.targets = np.append(self.nodes, b)
        tgt_panel = np.append(np.repeat(np.arange(P), nodes), P - 1)
        pts, wts, src, owner, interp = [], [], [], [], []
        for j, (u, p) in enumerate(zip(self.targets, tgt_panel)):
            for q in range(p + 1):
                lo, hi = self.edges[q], (self.edges[q + 1] if q < p else u)
                if hi <= lo:
                    continue
                y, w = _graded_toward_end(lo, hi, first, xs, ws, ratio)
                pts.append(y)
                wts.append(w)
                src.append(np.full(y.size, q))
                owner.append(np.full(y.size, j))
                interp.append(_bary(self.edges[q] + widths[q] * xs, bw / widths[q] ** (nodes - 1), y))
        self.points = np.concatenate(pts)
        self.weights = np.concatenate(wts)
        self.source = np.concatenate(src)
        self.owner = np.concatenate(owner)
        self.interp = np.concatenate(interp)
        self.n_panels, self.m = P, nodes
        # points are grouped by target, in target order
        self.starts = np.searchsorted(self.owner, np.arange(len(self.targets)))
        self.by_panel = [np.nonzero(self.source == q)[0] for q in range(P)]


def _sweep(ops: _SegmentOps, masks, state: dict, nodes: int, ratio: float,
           grading: float) -> dict:
    seg, tables, spec = ops.seg, ops.tables, ops.spec
    a, b = seg.start, seg.end
    mesh = _Mesh(a, b, ops.rate, nodes, ratio, grading)
    K = mesh.nodes.size
    at_nodes: dict = {}
    out: dict = {}
    for m in masks:
        d = tables.dims[m]
        src = np.zeros((K, d), dtype=complex)
        fed = False
        for v in range(spec.system.n_vertices):
            prev = m & ~(1 << v)
            if m >> v & 1 and prev in at_nodes and spec.can_insert(prev, v, seg):
                src += at_nodes[prev] @ tables.insert[prev, v].T
                fed = True
        y0 = state.get(m)
        if y0 is None and not fed:
            continue
        vals = np.zeros((mesh.targets.size, d), dtype=complex)
        for u in ops.units[m]:
            g = src[:, u.idx]
            for idx, C in u.feeds:
                g = g + vals[:-1, idx] @ C.T
            part = np.zeros((mesh.targets.size, u.idx.size), dtype=complex)
            if y0 is not None:
                start = np.asarray(y0)[u.idx]
                if np.any(start):
                    part += u.eig.propagate(mesh.targets - a,
                                            np.repeat(start[None, :], mesh.targets.size, axis=0))
            if np.any(g):
                gp = np.empty((mesh.points.size, u.idx.size), dtype=complex)
                panels = g.reshape(mesh.n_panels, mesh.m, u.idx.size)
                for q, sel in enumerate(mesh.by_panel):
                    gp[sel] = mesh.interp[sel] @ panels[q]
                gap = mesh.targets[mesh.owner] - mesh.points
                contrib = u.eig.propagate(gap, gp) * mesh.weights[:, None]
                part += np.add.reduceat(contrib, mesh.starts, axis=0)
            vals[:, u.idx] = part
        at_nodes[m] = vals[:-1]
        out[m] = vals[-1]
    return out


def _open_tail(ops: _SegmentOps, state: dict, masks, full: int, nodes: int,
               ratio: float, grading: float) -> complex:
    seg, tables, spec = ops.seg, ops.tables, ops.spec
    length = seg.end - seg.start
    h, w = graded_tail_rule(grading / max(ops.rate, 1e-300), length, nodes, ratio,
                            widest=2.0 / ops.slowest)
    integ = {}
    for m in masks:
        if m == full:
            continue
        src = np.array(state.get(m, np.zeros(tables.dims[m])), dtype=complex)
        for v in range(spec.system.n_vertices):
            prev = m & ~(1 << v)
            if m >> v & 1 and prev in integ and spec.can_insert(prev, v, seg):
                src = src + tables.insert[prev, v] @ integ[prev]
        # the tail integral of each piece only needs the tail integrals of
        # the pieces feeding it
        out = np.zeros_like(src)
        for u in ops.units[m]:
            g = src[u.idx]
            for idx, C in u.feeds:
                g = g + C @ out[idx]
            if np.any(g):
                out[u.idx] = u.eig.integrated(h, w) @ g
        integ[m] = out
    total = np.array(state.get(full, np.zeros(1)), dtype=complex)
    for v in range(spec.system.n_vertices):
        prev = full & ~(1 << v)
        if prev in integ and spec.can_insert(prev, v, seg):
            total = total + tables.insert[prev, v] @ integ[prev]
    return total[0]
