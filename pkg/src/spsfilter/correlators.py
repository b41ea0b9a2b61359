"""Two-time and four-time dipole correlators of the pulse-pumped emitter.

``two_time(t1, t2)`` is ``<sigma^+(t1) sigma(t2)>`` and ``four_time`` is
``<sigma^+(t1) sigma^+(t2) sigma(t3) sigma(t4)>``, both in the rotating frame
and for arbitrary time orderings.  Values come from the closed-path regression
tables of :mod:`spsfilter.paths`.  For times past the end of the pulse,
:func:`appendix_reduction` gives the closed-form reduction onto correlators
with every time inside the pulse; it serves as an independent check of the
generic engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .liouville import RateSet
from .paths import PathSystem, tables_for

__all__ = ["CorrelatorValue", "PROVENANCES", "two_time", "four_time",
           "appendix_reduction", "is_out_of_time_order", "TWO_TIME", "FOUR_TIME"]

PROVENANCES = ("standard-QRT", "generalized-QRT", "appendix-reduction", "forced-zero")

# vertex v carries time t_{v+1}; loops list the operator nearest the state first
TWO_TIME = PathSystem(loops=((1, 0),), ops=("sd", "s"))
FOUR_TIME = PathSystem(loops=((3, 2, 1, 0),), ops=("sd", "sd", "s", "s"))


@dataclass(frozen=True)
class CorrelatorValue:
    value: complex
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __complex__(self) -> complex:
        return complex(self.value)


def _check_times(times) -> list[float]:
    out = []
    for t in times:
        t = float(t)
        if not math.isfinite(t) or t < 0.0:
            raise ValueError(f"correlator times must be finite and >= 0, got {t!r}")
        out.append(t)
    return out


def is_out_of_time_order(times) -> bool:
    """True if some operator not at the latest time has later operators on
    both sides of it in the product."""
    last = max(times)
    for i, t in enumerate(times):
        if t == last:
            continue
        later = [j for j, s in enumerate(times) if s > t]
        if any(j < i for j in later) and any(j > i for j in later):
            return True
    return False


def two_time(t1: float, t2: float, rates: RateSet) -> CorrelatorValue:
    """``<sigma^+(t1) sigma(t2)>``."""
    t1, t2 = _check_times((t1, t2))
    value = tables_for(TWO_TIME, rates).value((t1, t2))
    return CorrelatorValue(value, "standard-QRT")


def four_time(t1: float, t2: float, t3: float, t4: float, rates: RateSet) -> CorrelatorValue:
    """``<sigma^+(t1) sigma^+(t2) sigma(t3) sigma(t4)>`` for any time order."""
    times = _check_times((t1, t2, t3, t4))
    value = tables_for(FOUR_TIME, rates).value(times)
    tag = "generalized-QRT" if is_out_of_time_order(times) else "standard-QRT"
    return CorrelatorValue(value, tag)


def appendix_reduction(t1: float, t2: float, t3: float, t4: float,
                       rates: RateSet) -> CorrelatorValue | None:
    """Closed-form reduction of ``four_time`` when some time exceeds the pulse.

    Returns ``None`` when every time lies inside the pulse.
    """
    times = _check_times((t1, t2, t3, t4))
    T = rates.pulse_T
    after = tuple(i for i, t in enumerate(times) if t > T)
    if not after:
        return None
    half = 0.5 * (rates.gamma_diss + rates.gamma_deph)
    clipped = [min(t, T) for t in times]

    if len(after) == 1:
        (i,) = after
        base = four_time(*clipped, rates).value
        return CorrelatorValue(base * math.exp(-half * (times[i] - T)), "appendix-reduction")

    if len(after) == 2:
        a, b = after
        # a creation and an annihilation operator past the pulse; two of a
        # kind past the pulse cannot both act on a single excitation
        if (a < 2) != (b < 2):
            base = four_time(*clipped, rates).value
            ta, tb = times[a], times[b]
            factor = math.exp(-half * abs(ta - tb) - rates.gamma_diss * (min(ta, tb) - T))
            return CorrelatorValue(base * factor, "appendix-reduction")
    return CorrelatorValue(0.0j, "forced-zero")
