import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rate_sets
from spsfilter.correlators import FOUR_TIME, TWO_TIME, four_time, two_time
from spsfilter.gridsum import BACKEND, grid_sum, grid_sum_numpy
from spsfilter.oracles import OracleGrid, grid_sum_inputs

compiled = pytest.mark.skipif(BACKEND != "compiled", reason="extension not built")


def brute(fn, grid, weights, n):
    t = grid.times
    total = 0j
    for idx in itertools.product(range(t.size), repeat=n):
        w = np.prod([weights[v, i] for v, i in enumerate(idx)])
        total += w * fn(*[t[i] for i in idx]).value
    return total


@settings(max_examples=5)
@given(rate_sets(pulse=st.floats(0.2, 2.0)), st.integers(0, 2**32 - 1))
def test_numpy_kernel_matches_pointwise_four_time(rates, seed):
    grid = OracleGrid(rates.pulse_T, rates.pulse_T + 2.0, 2, 2)
    w = np.random.default_rng(seed).normal(size=(4, grid.times.size)) + 0j
    want = brute(lambda *t: four_time(*t, rates), grid, w, 4)
    got = grid_sum_numpy(*grid_sum_inputs(FOUR_TIME, rates, grid, w))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-14)


def test_numpy_kernel_two_time(typical_rates):
    grid = OracleGrid(typical_rates.pulse_T, 3.0, 4, 4)
    w = np.ones((2, grid.times.size), dtype=complex)
    want = brute(lambda a, b: two_time(a, b, typical_rates), grid, w, 2)
    assert grid_sum_numpy(*grid_sum_inputs(TWO_TIME, typical_rates, grid, w)) == \
        pytest.approx(want, rel=1e-10)


@compiled
@settings(max_examples=10)
@given(rate_sets(pulse=st.floats(0.2, 2.0)), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_compiled_matches_numpy(rates, n, seed):
    grid = OracleGrid(rates.pulse_T, rates.pulse_T + 3.0, 2 * (n // 2 + 1), 2 * n)
    w = np.random.default_rng(seed).normal(size=(4, grid.times.size)) + 0j
    args = grid_sum_inputs(FOUR_TIME, rates, grid, w)
    assert grid_sum(*args) == pytest.approx(grid_sum_numpy(*args), rel=1e-11, abs=1e-15)


@compiled
def test_compiled_rejects_oversized_problems(typical_rates):
    grid = OracleGrid(typical_rates.pulse_T, 2.0, 2, 2)
    w = np.ones((4, grid.times.size), dtype=complex)
    U_on, U_off, ins, dims, init, i_T, _ = grid_sum_inputs(FOUR_TIME, typical_rates, grid, w)
    with pytest.raises(ValueError):
        grid_sum(U_on, U_off, ins, dims, init, i_T, np.ones((9, 3), dtype=complex))


def test_backend_switch(monkeypatch):
    import importlib

    import spsfilter.gridsum as gs
    monkeypatch.setenv("SPSFILTER_PURE_PYTHON", "1")
    try:
        mod = importlib.reload(gs)
        assert mod.BACKEND == "numpy" and mod.grid_sum is mod.grid_sum_numpy
    finally:
        monkeypatch.delenv("SPSFILTER_PURE_PYTHON")
        importlib.reload(gs)
