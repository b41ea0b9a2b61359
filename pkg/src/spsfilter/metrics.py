"""Figures of merit as ordered-time integrals of emitter correlators.

Every metric is a ratio of integrals of the form
``prefactor * integral kernel(t) * correlator(t) dt`` where the kernel is a
product of exponentials (:class:`~spsfilter.kernels.ExpKernel`).  Each one is
handed to :mod:`spsfilter.integrate` and evaluated by the block-exponential
fast path, by nested Gauss-Legendre quadrature, or both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .filters import FilterSpec
from .integrate import OrderedIntegral, Segment, evaluate_expm, evaluate_gauss
from .kernels import ExpKernel
from .liouville import RateSet
from .paths import PathSystem, tables_for

__all__ = [
    "IntegrationConfig", "MetricRecord", "AccuracyError", "DegenerateInputError",
    "indistinguishability", "g2_filtered_at_T", "g2_detector_window",
    "g2_infinity", "qy_ratio", "analytic_limits", "LIMIT_NAMES",
    "emission", "filtered_emission", "horizon", "METRIC_NAMES",
    "photons_per_pulse", "EMISSION_FLOOR", "integrated_amplitude", "windowed_intensity",
]

PATHS = ("semi-analytic", "quadrature", "both")

# vertex 0 = sigma^+(t1), 1 = sigma(t2); sigma acts first
TWO = PathSystem(loops=((1, 0),), ops=("sd", "s"))
# <s^+(t1) s^+(t2) s(t3) s(t4)>, vertex k-1 = t_k
FOUR = PathSystem(loops=((3, 2, 1, 0),), ops=("sd", "sd", "s", "s"))
# <s^+(t1) s(t2)> <s^+(t4) s(t3)>, the second factor being the conjugate pair
PAIR = PathSystem(loops=((1, 0), (2, 3)), ops=("sd", "s", "s", "sd"))
POP = PathSystem(loops=((0,),), ops=("n",))
# detection-time dummies: vertex k + n belongs to operator k
TWO_WIN = PathSystem(loops=((1, 0),), ops=("sd", "s", "", ""))
FOUR_WIN = PathSystem(loops=((3, 2, 1, 0),), ops=("sd", "sd", "s", "s", "", "", "", ""))

# fewer emitted photons than this per pulse count as no emission at all
EMISSION_FLOOR = 1e-12


class AccuracyError(ArithmeticError):
    """Requested tolerance not met; carries the best estimate and its bound."""

    def __init__(self, message: str, estimate: float, bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, bound={bound!r})")
        self.estimate = estimate
        self.bound = bound


class DegenerateInputError(ValueError):
    """The emitted intensity is too small for a ratio to mean anything."""


@dataclass(frozen=True)
class IntegrationConfig:
    """Numerical settings shared by all metrics.

    ``horizon_factor`` sets the truncation of infinite time ranges at
    ``T + horizon_factor / r_min``, ``r_min`` being the slowest decay rate in
    play.  ``path`` picks the evaluator: ``"semi-analytic"`` (block matrix
    exponentials), ``"quadrature"`` (nested Gauss-Legendre) or ``"both"``,
    which cross-checks the two and raises :class:`AccuracyError` when they
    disagree beyond the tolerances.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    horizon_factor: float = 40.0
    quad_nodes: int = 8
    path: str = "semi-analytic"

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be > 0")
        if not self.horizon_factor >= 10:
            raise ValueError("horizon_factor must be >= 10")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be >= 2")
        if self.path not in PATHS:
            raise ValueError(f"path must be one of {PATHS}, got {self.path!r}")


@dataclass
class MetricRecord:
    """Values and error estimates of one parameter point; ``None`` if not computed."""

    indistinguishability: float | None = None
    g2_at_T: float | None = None
    g2_infinity: float | None = None
    qy_ratio: float | None = None
    errors: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    wall_time: float = 0.0


@dataclass(frozen=True)
class _Value:
    value: complex
    error: float


# -- integral assembly --------------------------------------------------------

def horizon(rates: RateSet, cfg: IntegrationConfig, filt: FilterSpec | None = None) -> float:
    slow = min(rates.gamma_diss, 0.5 * (rates.gamma_diss + rates.gamma_deph))
    if filt is not None:
        slow = min(slow, filt.gamma_F)
    return rates.pulse_T + cfg.horizon_factor / slow


def _segments(breaks, rates: RateSet, shift, insertable_at) -> tuple:
    pts = sorted(set(b for b in breaks if b >= 0.0))
    segs = []
    for a, b in zip(pts[:-1], pts[1:]):
        segs.append(Segment(a, b, pump_on=b <= rates.pulse_T,
                            insertable=frozenset(insertable_at(a, b)), shift=shift))
    return tuple(segs)


def _evaluate(system: PathSystem, rates: RateSet, spec_kwargs: dict,
              cfg: IntegrationConfig) -> _Value:
    spec = OrderedIntegral(system=system, **spec_kwargs)
    tables = tables_for(system, rates)
    # each vertex time beyond the horizon costs at least exp(-horizon_factor)
    tail = system.n_vertices * math.exp(-cfg.horizon_factor) if spec.open_tail else 0.0
    if cfg.path == "semi-analytic":
        v = evaluate_expm(tables, spec)
        return _Value(v, (tail + 1e-13) * abs(v))
    if cfg.path == "quadrature":
        v = evaluate_gauss(tables, spec, nodes=cfg.quad_nodes)
        g = evaluate_gauss(tables, spec, nodes=cfg.quad_nodes + 4)
        return _Value(g, tail * abs(g) + abs(g - v))
    a = evaluate_expm(tables, spec)
    g = evaluate_gauss(tables, spec, nodes=cfg.quad_nodes)
    return _Value(a, tail * abs(a) + abs(a - g))


def _all_vertices(n):
    return lambda a, b: range(n)


def emission(rates: RateSet, cfg: IntegrationConfig) -> _Value:
    """Total emitted intensity: time integral of the excited population."""
    H = horizon(rates, cfg)
    segs = _segments([0.0, rates.pulse_T, H], rates, ExpKernel(), _all_vertices(1))
    return _evaluate(POP, rates, dict(segments=segs, open_tail=True), cfg)


def filtered_emission(rates: RateSet, filt: FilterSpec, cfg: IntegrationConfig) -> _Value:
    """Time integral of the filtered intensity, using the power kernel."""
    H = horizon(rates, cfg, filt)
    kern = ExpKernel(linear=((-1j * filt.detuning, 0, 1),),
                     absolute=((filt.gamma_F, 0, 1),))
    segs = _segments([0.0, rates.pulse_T, H], rates, kern, _all_vertices(2))
    return _evaluate(TWO, rates, dict(segments=segs, prefactor=0.5 * filt.gamma_F,
                                      open_tail=True), cfg)


def photons_per_pulse(rates: RateSet) -> float:
    """Mean number of emitted photons, ``gamma_diss`` times the integrated population."""
    d = rates.derived
    T = rates.pulse_T
    during = d.p * (T + math.expm1(-d.gamma * T) / d.gamma)
    after = d.p * -math.expm1(-d.gamma * T) / rates.gamma_diss
    return rates.gamma_diss * during + rates.gamma_diss * after


def _check_emission(rates: RateSet, den: _Value, what: str):
    n = photons_per_pulse(rates)
    if not n > EMISSION_FLOOR:
        raise DegenerateInputError(
            f"{n!r} photons per pulse is below the emission floor {EMISSION_FLOOR}")
    v = den.value.real
    if not (v > 0.0 and v > 1e3 * den.error):
        raise DegenerateInputError(f"{what} = {v!r} is not resolved from zero")


def _ratio_error(num: _Value, den: _Value, power: int) -> float:
    r = abs(num.value) / abs(den.value) ** power
    return r * (num.error / max(abs(num.value), 1e-300) + power * den.error / abs(den.value))


def _finish(value: float, err: float, cfg: IntegrationConfig, name: str,
            lo: float | None = None, hi: float | None = None) -> tuple[float, float]:
    if err > cfg.rel_tol * abs(value) + cfg.abs_tol:
        raise AccuracyError(f"{name}: tolerance not met", value, err)
    if lo is not None and lo - cfg.abs_tol <= value < lo:
        value = lo
    if hi is not None and hi < value <= hi + cfg.abs_tol:
        value = hi
    return value, err


# -- metrics -------------------------------------------------------------------

def qy_ratio(rates: RateSet, filt: FilterSpec, cfg: IntegrationConfig = IntegrationConfig(),
             with_error: bool = False):
    """Fraction of the emitted energy that passes the filter."""
    den = emission(rates, cfg)
    _check_emission(rates, den, "emission")
    num = filtered_emission(rates, filt, cfg)
    val, err = _finish(num.value.real / den.value.real, _ratio_error(num, den, 1), cfg,
                       "qy_ratio", 0.0, 1.0)
    return (val, err) if with_error else val


def indistinguishability(rates: RateSet, filt: FilterSpec,
                         cfg: IntegrationConfig = IntegrationConfig(), with_error: bool = False):
    """Two-photon interference visibility of the filtered field."""
    den = filtered_emission(rates, filt, cfg)
    _check_emission(rates, den, "filtered emission")
    H = horizon(rates, cfg, filt)
    g, d = filt.gamma_F, filt.detuning
    # x(t1 - t3) x*(t2 - t4)
    kern = ExpKernel(linear=((-1j * d, 0, 2), (1j * d, 1, 3)),
                     absolute=((g, 0, 2), (g, 1, 3)))
    segs = _segments([0.0, rates.pulse_T, H], rates, kern, _all_vertices(4))
    num = _evaluate(PAIR, rates, dict(segments=segs, prefactor=(0.5 * g) ** 2,
                                      open_tail=True), cfg)
    val, err = _finish(num.value.real / den.value.real ** 2, _ratio_error(num, den, 2), cfg,
                       "indistinguishability", 0.0, 1.0)
    return (val, err) if with_error else val


def _at_T_parts(rates: RateSet, filt: FilterSpec, cfg: IntegrationConfig):
    T = rates.pulse_T
    a = filt.pole
    # f*(T - t) for sigma^+ vertices and f(T - t) for sigma vertices
    k2 = ExpKernel(linear=((-a.conjugate(), None, 0), (-a, None, 1)))
    den = _evaluate(TWO, rates, dict(
        segments=_segments([0.0, T], rates, k2, _all_vertices(2)),
        prefactor=filt.gamma_F ** 2), cfg)
    k4 = ExpKernel(linear=((-a.conjugate(), None, 0), (-a.conjugate(), None, 1),
                           (-a, None, 2), (-a, None, 3)))
    num = _evaluate(FOUR, rates, dict(
        segments=_segments([0.0, T], rates, k4, _all_vertices(4)),
        prefactor=filt.gamma_F ** 4), cfg)
    return num, den


def g2_filtered_at_T(rates: RateSet, filt: FilterSpec,
                     cfg: IntegrationConfig = IntegrationConfig(), with_error: bool = False):
    """Instantaneous filtered second-order correlation at the end of the pulse."""
    if rates.pulse_T <= 0.0:
        raise DegenerateInputError("g2 at T needs pulse_T > 0: nothing is emitted otherwise")
    num, den = _at_T_parts(rates, filt, cfg)
    _check_emission(rates, den, "filtered intensity at T")
    val, err = _finish(num.value.real / den.value.real ** 2, _ratio_error(num, den, 2), cfg,
                       "g2_at_T", 0.0)
    return (val, err) if with_error else val


def integrated_amplitude(rates: RateSet, cfg: IntegrationConfig = IntegrationConfig()) -> _Value:
    """Double time integral of ``<sigma^+(t1) sigma(t2)>`` over the positive quadrant."""
    H = horizon(rates, cfg)
    segs2 = _segments([0.0, rates.pulse_T, H], rates, ExpKernel(), _all_vertices(2))
    return _evaluate(TWO, rates, dict(segments=segs2, open_tail=True), cfg)


def g2_infinity(rates: RateSet, cfg: IntegrationConfig = IntegrationConfig(),
                with_error: bool = False):
    """Second-order correlation of the time-integrated field (detector window to infinity)."""
    H = horizon(rates, cfg)
    den = integrated_amplitude(rates, cfg)
    _check_emission(rates, den, "integrated amplitude")
    segs4 = _segments([0.0, rates.pulse_T, H], rates, ExpKernel(), _all_vertices(4))
    num = _evaluate(FOUR, rates, dict(segments=segs4, open_tail=True), cfg)
    val, err = _finish(num.value.real / den.value.real ** 2, _ratio_error(num, den, 2), cfg,
                       "g2_infinity", 0.0)
    return (val, err) if with_error else val


def _window_integral(system: PathSystem, n_ops: int, rates: RateSet, filt: FilterSpec,
                     t: float, tau: float, cfg: IntegrationConfig) -> _Value:
    a = filt.pole
    lin = []
    for k in range(n_ops):
        c = a.conjugate() if system.ops[k] == "sd" else a
        lin.append((-c, k + n_ops, k))        # f(d_k - t_k)
    kern = ExpKernel(linear=tuple(lin))
    end = t + tau

    def insertable(lo, hi):
        ops = list(range(n_ops))
        return ops + [k + n_ops for k in range(n_ops)] if lo >= t else ops

    def allowed(mask, v):
        return v < n_ops or bool(mask >> (v - n_ops) & 1)

    segs = _segments([0.0, min(rates.pulse_T, end), t, end], rates, kern, insertable)
    return _evaluate(system, rates, dict(segments=segs, prefactor=filt.gamma_F ** n_ops,
                                         allowed=allowed), cfg)


def windowed_intensity(t: float, tau: float, rates: RateSet, filt: FilterSpec,
                       cfg: IntegrationConfig = IntegrationConfig()) -> _Value:
    """Filtered two-time correlator integrated over ``[t, t + tau]`` in both detection times."""
    if cfg.path != "semi-analytic":
        cfg = IntegrationConfig(cfg.rel_tol, cfg.abs_tol, cfg.horizon_factor,
                                cfg.quad_nodes, "semi-analytic")
    return _window_integral(TWO_WIN, 2, rates, filt, t, tau, cfg)


def g2_detector_window(t: float, tau: float, rates: RateSet, filt: FilterSpec,
                       cfg: IntegrationConfig = IntegrationConfig(), with_error: bool = False):
    """Second-order correlation of the filtered field integrated over ``[t, t + tau]``."""
    if not t >= 0.0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    if not tau > 0.0:
        raise ValueError(f"tau must be > 0, got {tau!r}")
    if cfg.path != "semi-analytic":
        cfg = IntegrationConfig(cfg.rel_tol, cfg.abs_tol, cfg.horizon_factor,
                                cfg.quad_nodes, "semi-analytic")
    den = _window_integral(TWO_WIN, 2, rates, filt, t, tau, cfg)
    _check_emission(rates, den, "windowed intensity")
    num = _window_integral(FOUR_WIN, 4, rates, filt, t, tau, cfg)
    val, err = _finish(num.value.real / den.value.real ** 2, _ratio_error(num, den, 2), cfg,
                       "g2_detector_window", 0.0)
    return (val, err) if with_error else val


METRIC_NAMES = ("ind", "g2T", "g2inf", "qy")


# -- closed forms ---------------------------------------------------------------

def _p(gamma_pump=0.0, gamma_deph=0.0, gamma_F=1.0, pulse_T=0.0, gamma_diss=1.0):
    return gamma_pump, gamma_deph, gamma_F, pulse_T, gamma_diss


def _lim_I0(**kw):
    _, gph, _, _, gd = _p(**kw)
    return gd / (gd + gph)


def _lim_ind_wide(**kw):
    _, gph, _, T, gd = _p(**kw)
    x = T * gd
    shape = 1.0 if x < 1e-6 else 2.0 * (x + math.expm1(-x)) / x ** 2
    return _lim_I0(**kw) * shape


def _lim_ind_short(**kw):
    _, gph, gF, T, gd = _p(**kw)
    lift = gph / (gd + 2 * gF) * (gph + 3 * gd + 4 * gF) / (gph + 3 * gd + 2 * gF)
    drop = (T ** 2 * gF * gd / 12 * (gd + gph + 2 * gF) / (gd + 2 * gF)
            * (2 * gph + 3 * gd + 2 * gF) / (gph + 3 * gd + 2 * gF))
    return _lim_I0(**kw) * (1 + lift - drop)


def _lim_ind_narrow(**kw):
    _, _, gF, T, gd = _p(**kw)
    return 1 - 2 * gF / gd - T ** 2 * gd * gF / 6


def _lim_g2_cw(**kw):
    gp, gph, gF, _, gd = _p(**kw)
    g = gp + gd
    G = 0.5 * (gp + gd + gph)
    q = (1 - 2 * gp / g) ** 2
    return (2 * g ** 2 * (gF + g * q) * (G + gF)
            / ((g + 2 * gF) * (3 * g * gF + 2 * gF ** 2 + g ** 2 * q) * (G + 3 * gF)))


def _lim_g2_inf_short(**kw):
    _, gph, _, _, gd = _p(**kw)
    return 4 * gd / (gd + gph)


def _lim_qy_short(**kw):
    _, gph, gF, _, gd = _p(**kw)
    return 2 * gF / (gd + gph + 2 * gF)


def _lim_qy_long(**kw):
    gp, gph, gF, _, gd = _p(**kw)
    return 2 * gF / (gd + gph + gp + 2 * gF)


_LIMITS = {
    "I0": _lim_I0,
    "ind_wide": _lim_ind_wide,
    "ind_short": _lim_ind_short,
    "ind_narrow": _lim_ind_narrow,
    "g2_cw": _lim_g2_cw,
    "g2_inf_short": _lim_g2_inf_short,
    "qy_short": _lim_qy_short,
    "qy_long": _lim_qy_long,
}
LIMIT_NAMES = tuple(_LIMITS)


def analytic_limits(name: str, **params) -> float:
    """Evaluate a closed-form limit by name.

    Keyword parameters are ``gamma_pump``, ``gamma_deph``, ``gamma_F``,
    ``pulse_T`` and ``gamma_diss``; each formula reads the ones it needs.
    The caller is responsible for staying inside the regime where the
    formula holds.
    """
    try:
        fn = _LIMITS[name]
    except KeyError:
        raise ValueError(f"unknown limit {name!r}; valid names: {', '.join(LIMIT_NAMES)}") from None
    return float(fn(**params))
