"""Slow, independent references for the test suite.

* :func:`ode_oracle` integrates the master equation with an adaptive
  Runge-Kutta scheme instead of matrix exponentials.
* :func:`quadrature_oracle` evaluates each metric's defining integral by
  composite Simpson summation over a regular grid, calling the correlators
  pointwise.  It never touches :mod:`spsfilter.integrate`.
* :func:`limit_convergence_suite` compares the engine against closed forms deep
  inside their validity regimes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from . import metrics
from .correlators import FOUR_TIME, TWO_TIME, two_time
from .filters import FilterSpec, transfer_kernel
from .gridsum import grid_sum
from .liouville import GROUND, NumericalError, RateSet, build_liouvillian
from .paths import PathSystem, tables_for

__all__ = ["OracleReport", "ode_oracle", "simpson_weights", "OracleGrid",
           "correlator_grid_sum", "grid_sum_inputs", "quadrature_oracle", "limit_convergence_suite",
           "ORACLE_METRICS", "relative_deviation"]

ORACLE_METRICS = ("ind", "g2T", "g2inf", "qy")

# references smaller than this are compared in absolute terms
NEAR_ZERO = 1e-12


def relative_deviation(value: float, reference: float) -> float:
    """``|value - reference| / |reference|``, absolute below :data:`NEAR_ZERO`."""
    diff = abs(value - reference)
    return diff if abs(reference) < NEAR_ZERO else diff / abs(reference)


@dataclass
class OracleReport:
    quantity: str
    engine: float
    oracle: float
    deviation: float
    tolerance: float
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.tolerance)

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


# -- master equation by Runge-Kutta -------------------------------------------

def ode_oracle(rates: RateSet, t: float, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Vectorized density matrix at time ``t`` from adaptive DOP853 steps."""
    t = float(t)
    if not t >= 0.0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    y = GROUND.copy()
    T = rates.pulse_T
    for lo, hi, on in ((0.0, min(t, T), True), (T, t, False)):
        if hi <= lo:
            continue
        L = build_liouvillian(rates, on)
        sol = solve_ivp(lambda _, x: L @ x, (lo, hi), y, method="DOP853",
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"ODE oracle failed on [{lo}, {hi}]: {sol.message}")
        y = sol.y[:, -1]
    return y


# -- grids --------------------------------------------------------------------

def simpson_weights(a: float, b: float, intervals: int) -> np.ndarray:
    """Composite Simpson weights for ``intervals + 1`` equispaced points."""
    if intervals < 2 or intervals % 2:
        raise ValueError("Simpson needs an even number of intervals >= 2")
    h = (b - a) / intervals
    w = np.ones(intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


@dataclass(frozen=True)
class OracleGrid:
    """Regular grid on ``[0, T]`` joined to a regular grid on ``[T, end]``."""

    T: float
    end: float
    n_on: int
    n_off: int

    @property
    def i_T(self) -> int:
        return self.n_on

    @property
    def h_on(self) -> float:
        return self.T / self.n_on if self.n_on else 0.0

    @property
    def h_off(self) -> float:
        return (self.end - self.T) / self.n_off if self.n_off else 0.0

    @property
    def times(self) -> np.ndarray:
        on = np.linspace(0.0, self.T, self.n_on + 1)
        if not self.n_off:
            return on
        return np.concatenate([on, np.linspace(self.T, self.end, self.n_off + 1)[1:]])

    @property
    def weights(self) -> np.ndarray:
        w = np.zeros(self.n_on + self.n_off + 1)
        if self.n_on:
            w[: self.n_on + 1] += simpson_weights(0.0, self.T, self.n_on)
        if self.n_off:
            w[self.n_on:] += simpson_weights(self.T, self.end, self.n_off)
        return w


def correlator_grid_sum(system: PathSystem, rates: RateSet, grid: OracleGrid,
                        weights: np.ndarray) -> complex:
    """``sum prod_v weights[v, i_v] * C(t_{i_0}, ..., t_{i_n})`` over the grid.

    The grid's pulse edge must coincide with ``rates.pulse_T``.
    """
    return grid_sum(*grid_sum_inputs(system, rates, grid, weights))


def grid_sum_inputs(system: PathSystem, rates: RateSet, grid: OracleGrid,
                    weights: np.ndarray) -> tuple:
    """Positional arguments of :func:`spsfilter.gridsum.grid_sum` for this sum."""
    if not math.isclose(grid.T, rates.pulse_T, rel_tol=0.0, abs_tol=1e-14):
        raise ValueError("grid pulse edge differs from pulse_T")
    tables = tables_for(system, rates)
    n = system.n_vertices
    n_masks = 1 << n
    D = max(tables.dims.values())
    steps = max(grid.n_on, grid.n_off) + 1
    U_on = np.zeros((n_masks, steps, D, D), dtype=complex)
    U_off = np.zeros_like(U_on)
    for m in range(n_masks):
        d = tables.dims[m]
        for U, gen, h, count in ((U_on, tables.gen_on[m], grid.h_on, grid.n_on),
                                 (U_off, tables.gen_off[m], grid.h_off, grid.n_off)):
            step = scipy.linalg.expm(gen * h)
            P = np.eye(d, dtype=complex)
            for k in range(count + 1):
                U[m, k, :d, :d] = P
                P = step @ P
    ins = np.zeros((n_masks * n, D, D), dtype=complex)
    for (m, v), J in tables.insert.items():
        ins[m * n + v, : J.shape[0], : J.shape[1]] = J
    dims = np.array([tables.dims[m] for m in range(n_masks)], dtype=np.int_)
    return (U_on, U_off, ins, dims, np.ascontiguousarray(tables.initial),
            grid.i_T, np.ascontiguousarray(weights, dtype=complex))


def _two_time_matrix(rates: RateSet, times: np.ndarray) -> np.ndarray:
    C = np.empty((times.size, times.size), dtype=complex)
    for i, a in enumerate(times):
        for j in range(i, times.size):
            C[i, j] = two_time(a, times[j], rates).value
            C[j, i] = C[i, j].conjugate()
    return C


def _hat_moments(z: np.ndarray):
    """``int_0^1 e^{z u} (1 - u) du`` and ``int_0^1 e^{z u} u du``.

    Where ``Re z > 0`` both are returned multiplied by ``e^{-z}`` so nothing
    overflows; the third output marks those entries.
    """
    z = np.asarray(z, dtype=complex)
    left = np.empty_like(z)
    right = np.empty_like(z)
    small = np.abs(z) < 1e-3
    grow = (z.real > 0) & ~small
    rest = ~small & ~grow
    zs = z[small]
    left[small] = 0.5 + zs / 6.0 + zs ** 2 / 24.0
    right[small] = 0.5 + zs / 3.0 + zs ** 2 / 8.0
    zg = z[grow]
    em = np.exp(-zg)
    left[grow] = (1.0 - em * (1.0 + zg)) / zg ** 2
    right[grow] = (zg - 1.0 + em) / zg ** 2
    zr = z[rest]
    ez1 = np.expm1(zr)
    left[rest] = (ez1 - zr) / zr ** 2
    right[rest] = (zr * (ez1 + 1.0) - ez1) / zr ** 2
    return left, right, grow


def _kernel_matrix(t: np.ndarray, filt: FilterSpec) -> np.ndarray:
    """``K[i, j] = int x(t_i - s) phi_j(s) ds`` with ``phi_j`` the piecewise
    linear hat functions of the grid: exact for any filter width."""
    n = t.size
    K = np.zeros((n, n), dtype=complex)
    p, q = t[:-1], t[1:]
    h = q - p
    half = 0.5 * filt.gamma_F
    for i, ti in enumerate(t):
        # x(t_i - s) = (gamma_F / 2) exp(c (s - t_i)) with c set by the side of t_i
        c = np.where(q <= ti, filt.gamma_F + 1j * filt.detuning,
                     -filt.gamma_F + 1j * filt.detuning)
        z = c * h
        left, right, scaled = _hat_moments(z)
        # the moments were scaled by e^{-z} where they grow: anchor at q instead of p
        anchor = np.exp(c * (np.where(scaled, q, p) - ti))
        K[i, :-1] += half * h * anchor * left
        K[i, 1:] += half * h * anchor * right
    return K


# -- metrics by brute force ----------------------------------------------------

def _engine(metric: str, rates: RateSet, filt: FilterSpec | None) -> float:
    if metric == "ind":
        return metrics.indistinguishability(rates, filt)
    if metric == "g2T":
        return metrics.g2_filtered_at_T(rates, filt)
    if metric == "g2inf":
        return metrics.g2_infinity(rates)
    return metrics.qy_ratio(rates, filt)


def _tail_grids(rates: RateSet, filt: FilterSpec | None, points: int, decay_lengths: float):
    """Coarse and fine grid on ``[0, T + decay_lengths / slowest]``; a quarter
    of the points go to the pulse, where the integrands vary fastest."""
    slow = min(rates.gamma_diss, 0.5 * (rates.gamma_diss + rates.gamma_deph))
    if filt is not None:
        slow = min(slow, filt.gamma_F)
    end = rates.pulse_T + decay_lengths / slow
    half = max(4, points // 2)
    n_on = 2 * max(1, round(half / 8)) if rates.pulse_T > 0 else 0
    n_off = 2 * max(1, round((half - n_on) / 2))
    coarse = OracleGrid(rates.pulse_T, end, n_on, n_off)
    return coarse, OracleGrid(rates.pulse_T, end, 2 * n_on, 2 * n_off)


def _simpson(metric: str, rates: RateSet, filt: FilterSpec | None, grid: OracleGrid) -> float:
    t, w = grid.times, grid.weights
    if metric == "qy":
        C = _two_time_matrix(rates, t)
        K = _kernel_matrix(t, filt)
        num = (w[:, None] * K * C).sum()
        pop = np.array([ode_oracle(rates, s)[3] for s in t])
        return num.real / float(np.dot(w, pop.real))
    if metric == "ind":
        C = _two_time_matrix(rates, t)
        K = _kernel_matrix(t, filt)
        W = np.diag(w)
        den = (W @ (K * C)).sum()
        # sum x(t1 - t3) x*(t2 - t4) C(t1, t2) C(t4, t3), the inner pair by product rule
        M = K @ C.T @ K.conj().T
        num = (W @ (C * M) @ W).sum()
        return num.real / den.real ** 2
    if metric == "g2T":
        f = transfer_kernel(rates.pulse_T - t, filt)
        cw = np.stack([w * f.conj(), w * f.conj(), w * f, w * f])
        num = correlator_grid_sum(FOUR_TIME, rates, grid, cw)
        den = correlator_grid_sum(TWO_TIME, rates, grid, cw[1:3])
        return num.real / den.real ** 2
    num = correlator_grid_sum(FOUR_TIME, rates, grid, np.stack([w] * 4))
    den = correlator_grid_sum(TWO_TIME, rates, grid, np.stack([w] * 2))
    return num.real / den.real ** 2


def quadrature_oracle(metric: str, rates: RateSet, filt: FilterSpec | None = None,
                      points: int = 200, decay_lengths: float = 16.0,
                      max_tuples: float = 2e8, engine: float | None = None,
                      tolerance: float = 0.02) -> OracleReport:
    """Brute-force Simpson evaluation of one metric, compared with the engine.

    The truncated domain ``[0, T + decay_lengths / slowest rate]`` (``[0, T]``
    for ``g2T``) is covered by ``points`` intervals, and again by half as many.
    The integrands have kinks where two times meet, so Simpson converges only
    at second order there; the reported value is the Richardson combination
    ``(4 S_fine - S_coarse) / 3``.  Four-fold sums visit ``(points + 1) ** 4``
    tuples, and more than ``max_tuples`` raises :class:`MemoryError`.
    """
    if metric not in ORACLE_METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {ORACLE_METRICS}")
    if metric != "g2inf" and filt is None:
        raise ValueError(f"{metric} needs a filter")
    if metric == "g2T":
        if rates.pulse_T <= 0.0:
            raise ValueError("g2T needs pulse_T > 0")
        half = 2 * max(1, points // 4)
        coarse = OracleGrid(rates.pulse_T, rates.pulse_T, half, 0)
        fine = OracleGrid(rates.pulse_T, rates.pulse_T, 2 * half, 0)
    else:
        coarse, fine = _tail_grids(rates, filt if metric != "g2inf" else None,
                                   points, decay_lengths)
    size = fine.times.size
    if metric in ("g2T", "g2inf") and size ** 4 > max_tuples:
        raise MemoryError(f"{size ** 4:.3g} grid tuples exceed the budget {max_tuples:.3g}")
    s_coarse = _simpson(metric, rates, filt, coarse)
    s_fine = _simpson(metric, rates, filt, fine)
    value = (4.0 * s_fine - s_coarse) / 3.0
    meta = {"points": fine.n_on + fine.n_off, "n_on": fine.n_on, "n_off": fine.n_off,
            "end": fine.end, "simpson_fine": s_fine, "simpson_coarse": s_coarse}
    if engine is None:
        engine = _engine(metric, rates, filt)
    return OracleReport(metric, float(engine), float(value),
                        relative_deviation(float(engine), float(value)), tolerance, meta)


# -- closed-form limits ----------------------------------------------------------

# (label, limit name, metric, rate parameters, filter width, tolerance)
_LIMIT_CHECKS = (
    ("CW g2", "g2_cw", "g2T", dict(gamma_pump=1.0, gamma_deph=0.0, pulse_T=50.0), 1.0, 0.05),
    ("I0", "I0", "ind", dict(gamma_pump=1.0, gamma_deph=10.0, pulse_T=1e-3), 1e3, 0.02),
    ("I wide filter", "ind_wide", "ind", dict(gamma_pump=0.01, gamma_deph=10.0, pulse_T=1.0), 1e4, 0.02),
    ("I narrow filter", "ind_narrow", "ind", dict(gamma_pump=1.0, gamma_deph=10.0, pulse_T=0.1), 0.01, 0.005),
    ("QY short pulse", "qy_short", "qy", dict(gamma_pump=5.0, gamma_deph=10.0, pulse_T=0.01), 1.0, 0.05),
    ("QY long pulse", "qy_long", "qy", dict(gamma_pump=5.0, gamma_deph=10.0, pulse_T=50.0), 1.0, 0.05),
    ("g2_inf short pulse", "g2_inf_short", "g2inf", dict(gamma_pump=1.0, gamma_deph=0.0, pulse_T=0.01), None, 0.10),
    ("g2_inf short pulse, dephased", "g2_inf_short", "g2inf", dict(gamma_pump=1.0, gamma_deph=10.0, pulse_T=0.01), None, 0.10),
)


def limit_convergence_suite() -> list[OracleReport]:
    """Engine against closed forms; failures are reported, never raised."""
    reports = []
    for label, name, metric, params, width, tol in _LIMIT_CHECKS:
        rates = RateSet(**params)
        filt = FilterSpec(width) if width is not None else None
        ref = metrics.analytic_limits(name, gamma_F=width or 1.0, **params)
        meta = {"limit": name, "metric": metric, **params, "gamma_F": width}
        try:
            value = _engine(metric, rates, filt)
            dev = relative_deviation(value, ref)
        except (ArithmeticError, ValueError) as exc:
            value, dev = float("nan"), float("inf")
            meta["error"] = f"{type(exc).__name__}: {exc}"
        reports.append(OracleReport(label, float(value), float(ref), dev, tol, meta))
    return reports
