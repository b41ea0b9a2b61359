"""Backend choice for the brute-force grid kernel.

The compiled extension is used when it was built; setting the environment
variable ``SPSFILTER_PURE_PYTHON=1`` forces the numpy version.
"""
from __future__ import annotations

import os

from ._gridsum_py import grid_sum as grid_sum_numpy

__all__ = ["grid_sum", "grid_sum_numpy", "BACKEND"]

grid_sum = grid_sum_numpy
BACKEND = "numpy"
if os.environ.get("SPSFILTER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._gridsum import grid_sum  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        pass
