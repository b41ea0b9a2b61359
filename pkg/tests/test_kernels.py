import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spsfilter.kernels import ExpKernel

coef = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)
pos = st.floats(0.0, 3.0)
tvals = st.lists(st.floats(0.0, 2.0), min_size=3, max_size=3, unique=True)


def integrate_levels(kernel, t):
    """Sum the per-level shift across the sorted vertex times (top edge at 3)."""
    order = sorted(range(len(t)), key=t.__getitem__)
    edges = [0.0] + [t[v] for v in order] + [3.0]
    mask, total = 0, 0.0j
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        total += kernel(mask) * (b - a)
        if k < len(order):
            mask |= 1 << order[k]
    return total


@given(coef, tvals)
def test_linear_factor(c, t):
    k = ExpKernel(linear=((c, 0, 2),))
    assert integrate_levels(k, t) == pytest.approx(c * (t[0] - t[2]), abs=1e-12)


@given(pos, tvals)
def test_absolute_factor(r, t):
    k = ExpKernel(absolute=((r, 1, 2),))
    assert integrate_levels(k, t) == pytest.approx(-r * abs(t[1] - t[2]), abs=1e-12)


@given(coef, tvals)
def test_upper_edge_vertex(c, t):
    # None is the upper end of the domain, here 3
    k = ExpKernel(linear=((c, None, 1),))
    assert integrate_levels(k, t) == pytest.approx(c * (3.0 - t[1]), abs=1e-12)


def test_product_concatenates():
    a = ExpKernel(linear=((1.0, 0, 1),))
    b = ExpKernel(absolute=((2.0, 0, 1),))
    assert (a * b).linear == a.linear and (a * b).absolute == b.absolute
    assert (a * b)(0b01) == a(0b01) + b(0b01)
