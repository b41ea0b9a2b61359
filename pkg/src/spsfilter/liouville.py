"""Two-level emitter in vectorized Liouville space.

The density matrix is flattened row-major in the basis order
``(rho_gg, rho_ge, rho_eg, rho_ee)`` with ``g = 0`` and ``e = 1``.  With this
convention ``vec(A X B) = kron(A, B.T) @ vec(X)``.

Everything is expressed in the frame rotating at the emitter transition
frequency and in units where the dissipation rate is one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SIGMA", "SIGMA_DAG", "NUMBER", "IDENTITY", "GROUND", "TRACE_ROW",
    "RateSet", "DerivedRates", "NumericalError",
    "build_liouvillian", "propagate", "density_matrix_at",
    "left_mult", "right_mult", "dissipator", "is_physical",
]

SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_DAG = SIGMA.conj().T.copy()
NUMBER = SIGMA_DAG @ SIGMA
IDENTITY = np.eye(2, dtype=complex)
GROUND = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
# <<1| : picks rho_gg + rho_ee
TRACE_ROW = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)

for _arr in (SIGMA, SIGMA_DAG, NUMBER, IDENTITY, GROUND, TRACE_ROW):
    _arr.setflags(write=False)


class NumericalError(ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


def _check_rate(name: str, value: float, strictly_positive: bool = False) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if strictly_positive and value <= 0.0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if value < 0.0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class RateSet:
    """Physical rates of the pulse-pumped emitter, in units of ``gamma_diss``.

    Parameters
    ----------
    gamma_pump : float
        Incoherent pump rate while the pulse is on.
    gamma_diss : float
        Radiative dissipation rate. Used as the unit of rate, so normally 1.
    gamma_deph : float
        Pure dephasing rate.
    pulse_T : float
        Duration of the rectangular pump pulse starting at ``t = 0``.
    detuning : float
        Filter centre minus emitter frequency. Only the filter kernels use it.
    """

    gamma_pump: float = 0.0
    gamma_diss: float = 1.0
    gamma_deph: float = 0.0
    pulse_T: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma_pump", _check_rate("gamma_pump", self.gamma_pump))
        object.__setattr__(self, "gamma_diss",
                           _check_rate("gamma_diss", self.gamma_diss, strictly_positive=True))
        object.__setattr__(self, "gamma_deph", _check_rate("gamma_deph", self.gamma_deph))
        object.__setattr__(self, "pulse_T", _check_rate("pulse_T", self.pulse_T))
        detuning = float(self.detuning)
        if not math.isfinite(detuning):
            raise ValueError(f"detuning must be finite, got {detuning!r}")
        object.__setattr__(self, "detuning", detuning)

    @property
    def derived(self) -> "DerivedRates":
        return DerivedRates.from_rates(self)

    def replace(self, **changes) -> "RateSet":
        values = dict(gamma_pump=self.gamma_pump, gamma_diss=self.gamma_diss,
                      gamma_deph=self.gamma_deph, pulse_T=self.pulse_T,
                      detuning=self.detuning)
        values.update(changes)
        return RateSet(**values)


@dataclass(frozen=True)
class DerivedRates:
    """Population and coherence relaxation rates during the pulse."""

    gamma: float
    Gamma: float
    p: float
    tau_tls: float

    @classmethod
    def from_rates(cls, rates: RateSet) -> "DerivedRates":
        gp, gd, gph = rates.gamma_pump, rates.gamma_diss, rates.gamma_deph
        return cls(
            gamma=gp + gd,
            Gamma=(gp + gd + gph) / 2.0,
            p=gp / (gp + gd),
            tau_tls=rates.pulse_T + 1.0 / gd,
        )


def left_mult(op: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> op @ X``."""
    return np.kron(np.asarray(op, dtype=complex), IDENTITY)


def right_mult(op: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> X @ op``."""
    return np.kron(IDENTITY, np.asarray(op, dtype=complex).T)


def dissipator(jump: np.ndarray, rate: float) -> np.ndarray:
    """Superoperator of ``rate * (J X J^+ - {J^+ J, X} / 2)``."""
    jump = np.asarray(jump, dtype=complex)
    jdj = jump.conj().T @ jump
    return rate * (left_mult(jump) @ right_mult(jump.conj().T)
                   - 0.5 * left_mult(jdj) - 0.5 * right_mult(jdj))


def build_liouvillian(rates: RateSet, pump_on: bool) -> np.ndarray:
    """Lindblad generator with the pump switched on or off.

    The Hamiltonian part vanishes in the rotating frame, leaving pump,
    dissipation and dephasing dissipators.
    """
    L = dissipator(SIGMA, rates.gamma_diss) + dissipator(NUMBER, rates.gamma_deph)
    if pump_on and rates.gamma_pump > 0.0:
        L = L + dissipator(SIGMA_DAG, rates.gamma_pump)
    L.setflags(write=False)
    return L


def propagate(state: np.ndarray, dt: float, L: np.ndarray) -> np.ndarray:
    """Return ``expm(L * dt) @ state``."""
    if dt < 0.0:
        raise ValueError(f"dt must be >= 0, got {dt!r}")
    state = np.asarray(state, dtype=complex)
    if dt == 0.0:
        return state.copy()
    U = scipy.linalg.expm(np.asarray(L) * dt)
    if not np.all(np.isfinite(U)):
        raise NumericalError(
            f"matrix exponential produced non-finite entries (dt={dt!r}, "
            f"norm(L)={np.linalg.norm(L):.3g})")
    return U @ state


def density_matrix_at(t: float, rates: RateSet) -> np.ndarray:
    """Vectorized density matrix at time ``t`` for the ground-state start."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    T = rates.pulse_T
    rho = propagate(GROUND, min(t, T), build_liouvillian(rates, True))
    if t > T:
        rho = propagate(rho, t - T, build_liouvillian(rates, False))
    return rho


def is_physical(state: np.ndarray, tol: float = 1e-10) -> bool:
    rho = np.asarray(state).reshape(2, 2)
    if abs(np.trace(rho) - 1.0) > tol:
        return False
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol)
