import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad

from conftest import rate_sets
from spsfilter.correlators import TWO_TIME, two_time
from spsfilter.integrate import (OrderedIntegral, Segment, evaluate_expm, evaluate_gauss,
                                 graded_tail_rule, reachable_masks)
from spsfilter.kernels import ExpKernel
from spsfilter.liouville import RateSet
from spsfilter.metrics import photons_per_pulse
from spsfilter.paths import PathSystem, tables_for

POP = PathSystem(loops=((0,),), ops=("n",))


def square(rates, kernel=ExpKernel(), n=2, end=None):
    T = rates.pulse_T
    segs = [Segment(0.0, T, True, frozenset(range(n)), kernel)]
    if end is not None:
        segs.append(Segment(T, end, False, frozenset(range(n)), kernel))
    return tuple(segs)


def test_two_time_square_against_dblquad(typical_rates):
    r = typical_rates
    spec = OrderedIntegral(TWO_TIME, square(r))
    got = evaluate_expm(tables_for(TWO_TIME, r), spec)
    re = dblquad(lambda b, a: two_time(a, b, r).value.real, 0, r.pulse_T, 0, r.pulse_T,
                 epsabs=1e-12)[0]
    assert got.real == pytest.approx(re, rel=1e-7)
    assert abs(got.imag) < 1e-12


@given(rate_sets())
def test_population_integral_is_photon_number(rates):
    end = rates.pulse_T + 45.0
    spec = OrderedIntegral(POP, square(rates, n=1, end=end), open_tail=True)
    got = evaluate_expm(tables_for(POP, rates), spec)
    assert got.real == pytest.approx(photons_per_pulse(rates), rel=1e-9)


@settings(max_examples=10)
@given(rate_sets(pulse=st.floats(0.05, 2.0)), st.floats(0.1, 5.0))
def test_gauss_matches_expm_with_kernel(rates, gF):
    k = ExpKernel(absolute=((gF, 0, 1),))
    spec = OrderedIntegral(TWO_TIME, square(rates, k, end=rates.pulse_T + 40.0),
                           open_tail=True)
    tab = tables_for(TWO_TIME, rates)
    a, g = evaluate_expm(tab, spec), evaluate_gauss(tab, spec, nodes=10)
    assert g == pytest.approx(a, rel=1e-8)


def test_unreachable_full_mask_gives_zero(typical_rates):
    spec = OrderedIntegral(TWO_TIME, square(typical_rates, n=1))
    assert reachable_masks(spec) == [0, 1]
    assert evaluate_expm(tables_for(TWO_TIME, typical_rates), spec) == 0


def test_allowed_restricts_orderings(typical_rates):
    # vertex 1 only on top of vertex 0: half the square
    r = typical_rates
    spec = OrderedIntegral(TWO_TIME, square(r), allowed=lambda m, v: v == 0 or m & 1)
    got = evaluate_expm(tables_for(TWO_TIME, r), spec)
    want = dblquad(lambda b, a: two_time(a, b, r).value.real, 0, r.pulse_T,
                   lambda a: a, r.pulse_T, epsabs=1e-12)[0]
    assert got.real == pytest.approx(want, rel=1e-7)


@given(st.floats(1e-3, 0.3), st.floats(1.0, 100.0), st.floats(0.1, 5.0))
def test_graded_tail_rule(fraction, length, rate):
    # first panel a fraction of the decay length, as the integrator uses it
    want = -math.expm1(-rate * length) / rate
    for nodes, tol in ((8, 1e-7), (12, 1e-10)):
        x, w = graded_tail_rule(fraction / rate, length, nodes)
        assert w.sum() == pytest.approx(length, rel=1e-12)
        assert np.dot(w, np.exp(-rate * x)) == pytest.approx(want, rel=tol)


def test_zero_length_segments_skipped():
    r = RateSet(gamma_pump=1.0, pulse_T=0.0)
    spec = OrderedIntegral(POP, (Segment(0.0, 0.0, True, frozenset({0})),))
    assert evaluate_expm(tables_for(POP, r), spec) == 0
