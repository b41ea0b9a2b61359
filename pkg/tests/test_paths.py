import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rate_sets
from spsfilter.correlators import FOUR_TIME, TWO_TIME, two_time
from spsfilter.liouville import build_liouvillian, density_matrix_at
from spsfilter.paths import PathSystem, tables_for

times = st.floats(0.0, 4.0)
PAIR = PathSystem(loops=((1, 0), (2, 3)), ops=("sd", "s", "s", "sd"))
POP = PathSystem(loops=((0,),), ops=("n",))


@given(rate_sets())
def test_empty_mask_generator_is_liouvillian(rates):
    tab = tables_for(TWO_TIME, rates)
    assert np.allclose(tab.gen_on[0], build_liouvillian(rates, True), atol=1e-12)
    assert np.allclose(tab.gen_off[0], build_liouvillian(rates, False), atol=1e-12)


def test_block_sizes_follow_runs(typical_rates):
    tab = tables_for(FOUR_TIME, typical_rates)
    # one run -> 4, two runs -> 16, closed loop -> scalar
    assert tab.dims[0] == 4
    assert tab.dims[0b0101] == 16
    assert tab.dims[0b1111] == 1


@given(rate_sets(), times)
def test_population_vertex(rates, t):
    got = tables_for(POP, rates).value((t,))
    assert got == pytest.approx(density_matrix_at(t, rates)[3], abs=1e-12)


@given(rate_sets(), times, times, times, times)
def test_independent_loops_factorise(rates, a, b, c, d):
    got = tables_for(PAIR, rates).value((a, b, c, d))
    want = two_time(a, b, rates).value * two_time(d, c, rates).value
    assert got == pytest.approx(want, rel=1e-9, abs=1e-14)


def test_dummy_vertex_is_identity(typical_rates):
    sys_ = PathSystem(loops=((1, 0),), ops=("sd", "s", ""))
    tab = tables_for(sys_, typical_rates)
    assert np.array_equal(tab.insert[0, 2], np.eye(4))
    assert tab.value((0.3, 0.7, 0.5)) == pytest.approx(two_time(0.3, 0.7, typical_rates).value)


@pytest.mark.parametrize("loops,ops", [(((0, 1), (1,)), ("s", "sd")),
                                       (((0,),), ("s", "sd"))])
def test_malformed_systems(loops, ops):
    with pytest.raises(ValueError):
        PathSystem(loops=loops, ops=ops)


def test_wrong_number_of_times(typical_rates):
    with pytest.raises(ValueError):
        tables_for(TWO_TIME, typical_rates).value((0.1,))
