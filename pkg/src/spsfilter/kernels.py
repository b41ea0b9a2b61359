"""Exponential kernels in vertex times, expressed as per-level rate shifts.

A factor ``exp(c (t_a - t_b))`` equals ``exp(integral over levels s of
c ([t_b <= s] - [t_a <= s]))``, and ``exp(-r |t_a - t_b|)`` is a shift of
``-r`` on every level where exactly one of the two times lies below.  The
pseudo-vertex ``None`` stands for the upper end of a finite domain: it is
never below.
"""
from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ExpKernel"]


def _below(mask: int, v) -> int:
    return 0 if v is None else (mask >> v) & 1


@dataclass(frozen=True)
class ExpKernel:
    """``exp(sum c (t_a - t_b)) * exp(-sum r |t_a - t_b|)``.

    ``linear`` holds ``(c, a, b)`` triples and ``absolute`` holds ``(r, a, b)``.
    """

    linear: tuple = ()
    absolute: tuple = ()

    def __call__(self, mask: int) -> complex:
        s = 0.0j
        for c, a, b in self.linear:
            s += c * (_below(mask, b) - _below(mask, a))
        for r, a, b in self.absolute:
            if _below(mask, a) != _below(mask, b):
                s -= r
        return s

    def __mul__(self, other: "ExpKernel") -> "ExpKernel":
        return ExpKernel(self.linear + other.linear, self.absolute + other.absolute)
