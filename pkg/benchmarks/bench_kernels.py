"""Compiled vs numpy grid-sum kernel on a brute-force four-time sum.

    python benchmarks/bench_kernels.py [--points 16] [--repeat 3]

Both backends get the same inputs; the script checks that they agree and
prints tuples per second for each.
"""
import argparse
import time

import numpy as np

from spsfilter.correlators import FOUR_TIME
from spsfilter.gridsum import BACKEND, grid_sum, grid_sum_numpy
from spsfilter.liouville import RateSet
from spsfilter import oracles


def _inputs(points: int):
    rates = RateSet(gamma_pump=1.0, gamma_deph=2.0, pulse_T=1.0)
    grid = oracles.OracleGrid(1.0, 4.0, points // 2 * 2, points // 2 * 2)
    weights = np.stack([grid.weights] * 4).astype(complex)
    args = oracles.grid_sum_inputs(FOUR_TIME, rates, grid, weights)
    return args, grid.times.size ** 4


def _time(fn, args, repeat):
    best, value = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=16, help="intervals per side of the pulse edge")
    ap.add_argument("--repeat", type=int, default=3)
    opts = ap.parse_args()

    args, tuples = _inputs(opts.points)
    print(f"{tuples} grid tuples, selected backend: {BACKEND}")
    t_np, v_np = _time(grid_sum_numpy, args, opts.repeat)
    print(f"numpy     {t_np:8.3f} s  {tuples / t_np:12.0f} tuples/s  value {v_np:.12g}")
    if BACKEND != "compiled":
        print("compiled extension not built; nothing to compare")
        return
    t_c, v_c = _time(grid_sum, args, opts.repeat)
    print(f"compiled  {t_c:8.3f} s  {tuples / t_c:12.0f} tuples/s  value {v_c:.12g}")
    print(f"speed-up {t_np / t_c:.1f}x, relative difference {abs(v_c - v_np) / abs(v_np):.2e}")


if __name__ == "__main__":
    main()
