"""Lorentzian spectral filter in the rotating frame.

All kernels carry only the detuning ``delta = omega_F - omega_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["FilterSpec", "transmission", "transfer_kernel", "power_kernel", "dc_gain"]


@dataclass(frozen=True)
class FilterSpec:
    """Lorentzian filter of half-width ``gamma_F`` centred at ``detuning``."""

    gamma_F: float
    detuning: float = 0.0

    def __post_init__(self):
        g = float(self.gamma_F)
        if not (math.isfinite(g) and g > 0.0):
            raise ValueError(f"gamma_F must be finite and > 0, got {self.gamma_F!r}")
        d = float(self.detuning)
        if not math.isfinite(d):
            raise ValueError(f"detuning must be finite, got {self.detuning!r}")
        object.__setattr__(self, "gamma_F", g)
        object.__setattr__(self, "detuning", d)

    @property
    def pole(self) -> complex:
        """Decay constant ``a`` of the transfer kernel ``-i gamma_F exp(-a dt)``."""
        return complex(self.gamma_F, self.detuning)


def transmission(omega, filt: FilterSpec):
    """Complex transmission ``gamma_F / (omega - delta + i gamma_F)``."""
    return filt.gamma_F / (np.asarray(omega) - filt.detuning + 1j * filt.gamma_F)


def transfer_kernel(dt, filt: FilterSpec):
    """Causal impulse response; half value at ``dt == 0``."""
    dt = np.asarray(dt, dtype=float)
    val = -1j * filt.gamma_F * np.exp(-filt.pole * np.where(dt > 0.0, dt, 0.0))
    out = np.where(dt > 0.0, val, np.where(dt == 0.0, 0.5 * val, 0.0))
    return out[()] if out.ndim == 0 else out


def power_kernel(dt, filt: FilterSpec):
    """Fourier transform of ``|F|^2``: ``(gamma_F/2) exp(-gamma_F |dt| - i delta dt)``."""
    dt = np.asarray(dt, dtype=float)
    out = 0.5 * filt.gamma_F * np.exp(-filt.gamma_F * np.abs(dt) - 1j * filt.detuning * dt)
    return out[()] if out.ndim == 0 else out


def dc_gain(filt: FilterSpec) -> complex:
    """Time integral of the transfer kernel."""
    return -1j * filt.gamma_F / filt.pole
