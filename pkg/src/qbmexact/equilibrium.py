"""Reduced equilibrium of the damped oscillator and its effective-oscillator form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .baths import BathKind, SpectralDensitySpec
from .fock import FockBasis, FockDensityMatrix
from .gaussian_dynamics import StarPropagation
from .quadratic_model import QuadraticModel, SystemOscillator
from .units import HBAR


@dataclass(frozen=True)
class EquilibriumVariances:
    q2: float
    p2: float
    beta: float

    def __post_init__(self):
        if not (self.q2 > 0 and self.p2 > 0):
            raise ValueError("equilibrium variances must be positive")
        if self.q2 * self.p2 < 0.25 * HBAR**2 * (1 - 1e-12):
            raise ValueError("variances violate the uncertainty relation")


@dataclass(frozen=True)
class EffectiveOscillator:
    mass: float
    frequency: float
    beta: float

    def __post_init__(self):
        if not (self.mass > 0 and self.frequency > 0):
            raise ValueError("effective mass and frequency must be positive")

    @property
    def partition_norm(self) -> float:
        """Z = sum_n exp(-beta hbar w (n + 1/2))."""
        x = self.beta * HBAR * self.frequency
        return float(np.exp(-0.5 * x) / -np.expm1(-x))


def equilibrium_variances(model: QuadraticModel, beta: float) -> EquilibriumVariances:
    """System variances of the full model's Gibbs state."""
    if not beta > 0:
        raise ValueError("inverse temperature must be positive")
    C = StarPropagation(model).thermal_system_covariance(beta)
    return EquilibriumVariances(float(C[0, 0]), float(C[1, 1]), float(beta))


def _drude_laplace(spec: SpectralDensitySpec, z):
    return spec.coupling_strength * spec.cutoff / (spec.cutoff + z)


def matsubara_variances(spec: SpectralDensitySpec | None, system: SystemOscillator, beta: float,
                        n_terms: int = 4096) -> EquilibriumVariances:
    """Continuum equilibrium variances from the Matsubara representation.

    q2 = (1/(m beta)) sum_n 1/(nu_n^2 + w0^2 + |nu_n| g(|nu_n|)),
    p2 = (m/beta) sum_n (w0^2 + |nu_n| g)/(nu_n^2 + w0^2 + |nu_n| g),
    nu_n = 2 pi n/(hbar beta), g the Laplace transform of the Ohmic-Drude kernel.
    The sum is cut at ``n_terms``, the remainder added as a midpoint-rule
    integral, and two cuts are Richardson-combined.
    """
    if spec is not None and spec.kind is not BathKind.OHMIC_DRUDE:
        raise ValueError("Matsubara oracle implemented for Ohmic-Drude baths")
    if not (beta > 0 and np.isfinite(beta)):
        raise ValueError("Matsubara sums need a finite positive inverse temperature")
    m, w0 = system.mass, system.frequency
    step = 2.0 * np.pi / (HBAR * beta)

    def damp(nu):
        return 0.0 if spec is None else nu * _drude_laplace(spec, nu)

    def terms(nu):
        den = nu**2 + w0**2 + damp(nu)
        return 1.0 / den, (w0**2 + damp(nu)) / den

    def partial(n_cut):
        nu = step * np.arange(1, n_cut + 1)
        fq, fp = terms(nu)
        tq = integrate.quad(lambda n: terms(step * n)[0], n_cut + 0.5, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
        tp = integrate.quad(lambda n: terms(step * n)[1], n_cut + 0.5, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
        sq = 1.0 / w0**2 + 2.0 * (np.sum(fq[::-1]) + tq)
        sp = 1.0 + 2.0 * (np.sum(fp[::-1]) + tp)
        return sq, sp

    q_a, p_a = partial(n_terms)
    q_b, p_b = partial(2 * n_terms)
    # midpoint tail error falls as n^-3
    q = q_b + (q_b - q_a) / 7.0
    p = p_b + (p_b - p_a) / 7.0
    return EquilibriumVariances(q / (m * beta), m * p / beta, float(beta))


def effective_parameters(v: EquilibriumVariances) -> EffectiveOscillator:
    """Oscillator whose Gibbs state has the given variances.

    w_eff = (2/(hbar beta)) arccoth((2/hbar) sqrt(q2 p2)),
    m_eff = sqrt(p2/q2) / w_eff. At beta = inf the state must be pure and
    only m_eff * w_eff is determined; that case is rejected.
    """
    x = 2.0 * np.sqrt(v.q2 * v.p2) / HBAR
    if not x > 1.0:
        raise ValueError("arccoth needs sqrt(q2 p2) > hbar/2 (state is pure)")
    if not np.isfinite(v.beta):
        raise ValueError("effective frequency is undefined at zero temperature")
    w_eff = 2.0 / (HBAR * v.beta) * np.arctanh(1.0 / x)
    m_eff = np.sqrt(v.p2 / v.q2) / w_eff
    return EffectiveOscillator(float(m_eff), float(w_eff), v.beta)


def basis_change(eff: EffectiveOscillator, basis: FockBasis, n_eff: int, n_bare: int | None = None) -> np.ndarray:
    """U[n, k] = <n_bare | k_eff>, for n <= n_bare and k <= n_eff.

    The effective ladder operator is b = mu a + nu a^dagger with
    mu, nu = (s +- 1/s)/2 and s = sqrt(m_eff w_eff / (m w0)), so |0_eff> is a
    squeezed vacuum and higher columns follow from b^dagger.
    """
    n_bare = basis.n_max if n_bare is None else n_bare
    osc = basis.oscillator
    s = np.sqrt(eff.mass * eff.frequency / (osc.mass * osc.frequency))
    mu = 0.5 * (s + 1.0 / s)
    nu = 0.5 * (s - 1.0 / s)
    rows = n_bare + n_eff + 2
    U = np.zeros((rows, n_eff + 1))
    U[0, 0] = 1.0 / np.sqrt(mu)
    ratio = -nu / mu
    for n in range(1, rows - 1, 2):
        U[n + 1, 0] = ratio * np.sqrt(n / (n + 1.0)) * U[n - 1, 0]
    sq = np.sqrt(np.arange(rows + 1))
    for k in range(n_eff):
        col = U[:, k]
        nxt = np.zeros(rows)
        nxt[1:] += mu * sq[1:rows] * col[:-1]
        nxt[:-1] += nu * sq[1:rows] * col[1:]
        U[:, k + 1] = nxt / np.sqrt(k + 1.0)
    return U[: n_bare + 1]


def boltzmann_weights(eff: EffectiveOscillator, tol: float = 1e-17) -> np.ndarray:
    x = eff.beta * HBAR * eff.frequency
    k_max = max(2, int(np.ceil(-np.log(tol) / x)) + 1)
    k = np.arange(k_max + 1)
    return -np.expm1(-x) * np.exp(-x * k)


def stationary_density_matrix(eff: EffectiveOscillator, basis: FockBasis,
                              max_leakage: float = 1e-3) -> FockDensityMatrix:
    """Gibbs state of the effective oscillator written in the bare Fock basis."""
    p = boltzmann_weights(eff)
    U = basis_change(eff, basis, p.size - 1)
    rho = (U * p) @ U.T
    out = FockDensityMatrix(rho.astype(complex))
    if out.leakage > max_leakage:
        raise ValueError(f"truncation leakage {out.leakage:.2e} exceeds {max_leakage:g}")
    return out


def effective_basis_elements(rho: FockDensityMatrix, eff: EffectiveOscillator, basis: FockBasis,
                             n_eff: int) -> np.ndarray:
    """<k_eff| rho |l_eff> for k, l <= n_eff, using the bare elements available."""
    U = basis_change(eff, basis, n_eff, n_bare=rho.n_max)
    return U.T @ rho.elements @ U
