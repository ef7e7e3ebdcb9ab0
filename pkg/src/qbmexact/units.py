"""Natural units (hbar = m = omega0 = 1) and the SI conversions used at the boundary."""

from __future__ import annotations

import numpy as np
from scipy import constants

HBAR = 1.0
HBAR_SI = constants.hbar
K_B_SI = constants.k
DEFAULT_OMEGA0_SI = 3.0e14  # rad/s


def thermal_correlation_time(temperature_k: float) -> float:
    """Thermal time hbar / (k_B T) in seconds."""
    if not (temperature_k > 0 and np.isfinite(temperature_k)):
        raise ValueError(f"temperature must be positive and finite, got {temperature_k!r}")
    return HBAR_SI / (K_B_SI * temperature_k)


def beta_from_kelvin(temperature_k: float, omega0_si: float = DEFAULT_OMEGA0_SI) -> float:
    """Dimensionless inverse temperature hbar*omega0/(k_B T)."""
    return omega0_si * thermal_correlation_time(temperature_k)


def kelvin_from_beta(beta: float, omega0_si: float = DEFAULT_OMEGA0_SI) -> float:
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    return HBAR_SI * omega0_si / (K_B_SI * beta)


def to_natural_time(seconds: float, omega0_si: float = DEFAULT_OMEGA0_SI) -> float:
    return seconds * omega0_si


def to_seconds(t: float, omega0_si: float = DEFAULT_OMEGA0_SI) -> float:
    return t / omega0_si


def coth_factor(omega, beta):
    """coth(beta*hbar*omega/2), with beta = inf meaning the zero-temperature limit.

    ``beta`` here is 1/(k_B T) in natural units, so the argument is beta*omega/2.
    """
    omega = np.asarray(omega, dtype=float)
    if beta is None or beta == float("inf"):
        return np.ones_like(omega)
    x = 0.5 * beta * HBAR * omega
    out = np.empty_like(x)
    small = x < 1e-4
    xs = x[small]
    out[small] = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    out[~small] = 1.0 / np.tanh(x[~small])
    return out
