"""Quadratic Hamiltonians of a system oscillator plus discretized baths, and Gaussian states.

Phase-space vectors are ordered ``(q_S, q_1..q_N, p_S, p_1..p_N)`` and the
Hamiltonian is ``H = z^T A z / 2``. Inverse temperatures ``beta`` are in
natural units (1/k_B T with hbar = omega0 = 1); ``beta = inf`` is the
zero-temperature limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .baths import BathModes, CouplingType, SpectralDensitySpec
from .normal_modes import StarSpectrum, star_spectrum
from .units import HBAR, coth_factor

SYSTEM_LABEL = "system"


def symplectic_form(n_modes: int) -> np.ndarray:
    eye = np.eye(n_modes)
    zero = np.zeros((n_modes, n_modes))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class SystemOscillator:
    mass: float = 1.0
    frequency: float = 1.0
    charge_renormalized_mass: float | None = None

    def __post_init__(self):
        if not (self.mass > 0 and self.frequency > 0):
            raise ValueError("system mass and frequency must be positive")


@dataclass(frozen=True)
class AttachedBath:
    label: str
    spec: SpectralDensitySpec | None
    modes: BathModes

    @property
    def size(self) -> int:
        return len(self.modes)


@dataclass(eq=False)
class QuadraticModel:
    """System oscillator with any number of star-coupled baths.

    ``coefficient_matrix`` is built on first access; large models are
    handled through ``spectrum`` (normal modes of the mass-weighted
    Hessian) without ever forming it.
    """

    system: SystemOscillator
    baths: tuple[AttachedBath, ...] = ()

    @property
    def n_modes(self) -> int:
        return 1 + sum(b.size for b in self.baths)

    @property
    def layout(self) -> tuple[tuple[str, int], ...]:
        return ((SYSTEM_LABEL, 1),) + tuple((b.label, b.size) for b in self.baths)

    def bath_slice(self, label: str) -> slice:
        """Mode indices of a bath (0 is the system)."""
        start = 1
        for b in self.baths:
            if b.label == label:
                return slice(start, start + b.size)
            start += b.size
        raise KeyError(label)

    def bath(self, label: str) -> AttachedBath:
        for b in self.baths:
            if b.label == label:
                return b
        raise KeyError(label)

    # per-mode arrays over all bath modes, in layout order
    @cached_property
    def _mode_arrays(self):
        if not self.baths:
            empty = np.zeros(0)
            return empty, empty, empty, np.zeros(0, dtype=bool)
        m = np.concatenate([b.modes.masses for b in self.baths])
        w = np.concatenate([b.modes.frequencies for b in self.baths])
        c = np.concatenate([b.modes.position_couplings for b in self.baths])
        mom = np.concatenate([
            np.full(b.size, b.modes.coupling_type is CouplingType.MOMENTUM) for b in self.baths
        ])
        return m, w, c, mom

    @property
    def mode_masses(self) -> np.ndarray:
        return self._mode_arrays[0]

    @property
    def mode_frequencies(self) -> np.ndarray:
        return self._mode_arrays[1]

    @cached_property
    def coefficient_matrix(self) -> np.ndarray:
        m, w, c, mom = self._mode_arrays
        sys = self.system
        n = self.n_modes
        A = np.zeros((2 * n, 2 * n))
        qq = A[:n, :n]
        pp = A[n:, n:]
        qq[0, 0] = sys.mass * sys.frequency**2
        pp[0, 0] = 1.0 / sys.mass
        idx = np.arange(1, n)
        qq[idx, idx] = m * w**2
        pp[idx, idx] = 1.0 / m
        pos = ~mom
        # (q_j - c_j q/(m_j w_j^2))^2 counter-term structure
        qq[0, 0] += np.sum(c[pos] ** 2 / (m[pos] * w[pos] ** 2))
        qq[0, idx[pos]] = qq[idx[pos], 0] = -c[pos]
        # (p_k + m_k w_k q)^2 / 2 m_k
        qq[0, 0] += np.sum(m[mom] * w[mom] ** 2)
        A[0, n + idx[mom]] = A[n + idx[mom], 0] = w[mom]
        return A

    @cached_property
    def spectrum(self) -> StarSpectrum:
        """Normal modes in mass-weighted working coordinates (momentum modes swapped to position form)."""
        m, w, c, _ = self._mode_arrays
        sys = self.system
        couplings = -c / np.sqrt(sys.mass * m)
        return star_spectrum(sys.frequency**2, w**2, couplings)

    def working_maps(self):
        """Per-mode (a, b, c, d) with q = a x + b pi, p = c x + d pi.

        (x, pi) are mass-weighted working coordinates in which every mode is
        position-coupled; momentum-coupled modes enter through the swap
        x = p/(sqrt(m) w), pi = -sqrt(m) w q.
        """
        m, w, _, mom = self._mode_arrays
        ms = np.concatenate([[self.system.mass], m])
        ws = np.concatenate([[1.0], w])
        momf = np.concatenate([[False], mom])
        sq = np.sqrt(ms)
        a = np.where(momf, 0.0, 1.0 / sq)
        b = np.where(momf, -1.0 / (sq * ws), 0.0)
        c = np.where(momf, sq * ws, 0.0)
        d = np.where(momf, 0.0, sq)
        return a, b, c, d


def assemble(system: SystemOscillator, baths=()) -> QuadraticModel:
    """Build a model from ``(spec, modes)`` or ``(label, spec, modes)`` entries.

    Unlabelled baths are named TB, TB2, ... for position coupling and BB
    for momentum coupling.
    """
    attached: list[AttachedBath] = []
    labels: set[str] = set()
    n_momentum = 0
    for k, entry in enumerate(baths):
        if len(entry) == 3:
            label, spec, modes = entry
        else:
            spec, modes = entry
            label = None
        if not isinstance(modes, BathModes):
            modes = BathModes.from_modes(modes)
        if len(modes) == 0:
            raise ValueError("attached baths need at least one mode")
        if spec is not None and spec.coupling_type is not modes.coupling_type:
            raise ValueError("bath modes do not match the coupling type of their spectral density")
        if modes.coupling_type is CouplingType.MOMENTUM:
            n_momentum += 1
        if label is None:
            if modes.coupling_type is CouplingType.MOMENTUM:
                label = "BB"
            else:
                label = "TB" if "TB" not in labels else f"TB{k + 1}"
        if label in labels or label == SYSTEM_LABEL:
            raise ValueError(f"duplicate bath label {label!r}")
        labels.add(label)
        attached.append(AttachedBath(label, spec, modes))
    if n_momentum > 1:
        raise ValueError("at most one momentum-coupled bath is supported")
    return QuadraticModel(system, tuple(attached))


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean and symmetrized covariance over a block layout."""

    mean: np.ndarray
    covariance: np.ndarray
    layout: tuple[tuple[str, int], ...] = ((SYSTEM_LABEL, 1),)

    def __post_init__(self):
        n = sum(k for _, k in self.layout)
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.shape != (2 * n,) or cov.shape != (2 * n, 2 * n):
            raise ValueError("mean/covariance shapes do not match the layout")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def uncertainty_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of C + i hbar Omega / 2; physical states have all >= 0."""
        H = self.covariance + 0.5j * HBAR * symplectic_form(self.n_modes)
        return np.linalg.eigvalsh(H)

    def is_physical(self, tol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.covariance))))
        return bool(np.all(self.uncertainty_eigenvalues() >= -tol * scale))

    def purity(self) -> float:
        """Tr rho^2 = (hbar/2)^n / sqrt(det C)."""
        sign, logdet = np.linalg.slogdet(self.covariance)
        if sign <= 0:
            raise ValueError("covariance is not positive definite")
        return float(np.exp(self.n_modes * np.log(HBAR / 2) - 0.5 * logdet))


def system_state(covariance, mean=(0.0, 0.0)) -> GaussianState:
    return GaussianState(np.asarray(mean, dtype=float), np.asarray(covariance, dtype=float))


def _interleave_index(layout_a, layout_b):
    """Positions of the two states' coordinates inside the combined q-then-p vector."""
    na = sum(k for _, k in layout_a)
    nb = sum(k for _, k in layout_b)
    n = na + nb
    ia = np.concatenate([np.arange(na), n + np.arange(na)])
    ib = np.concatenate([na + np.arange(nb), n + na + np.arange(nb)])
    return ia, ib, n


def compose_product(state_a: GaussianState, state_b: GaussianState) -> GaussianState:
    """Tensor product of Gaussian states with disjoint layouts."""
    labels_a = {lab for lab, _ in state_a.layout}
    labels_b = {lab for lab, _ in state_b.layout}
    if labels_a & labels_b:
        raise ValueError(f"overlapping layout tags: {sorted(labels_a & labels_b)}")
    ia, ib, n = _interleave_index(state_a.layout, state_b.layout)
    mean = np.zeros(2 * n)
    cov = np.zeros((2 * n, 2 * n))
    mean[ia] = state_a.mean
    mean[ib] = state_b.mean
    cov[np.ix_(ia, ia)] = state_a.covariance
    cov[np.ix_(ib, ib)] = state_b.covariance
    return GaussianState(mean, cov, state_a.layout + state_b.layout)


def empty_state() -> GaussianState:
    return GaussianState(np.zeros(0), np.zeros((0, 0)), ())


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not beta > 0:
        raise ValueError(f"inverse temperature must be positive, got {beta!r}")
    return beta


def thermal_covariance_dense(A: np.ndarray, beta: float) -> np.ndarray:
    """Covariance of exp(-beta H) for H = z^T A z / 2 with A positive definite.

    With K = A^{1/2} Omega A^{1/2} (antisymmetric, -K^2 has the squared
    normal-mode frequencies), C = (hbar/2) A^{-1/2} g(-K^2) A^{-1/2}
    where g(s) = sqrt(s) coth(beta hbar sqrt(s)/2).
    """
    evals, V = np.linalg.eigh(0.5 * (A + A.T))
    if evals[0] <= 1e-14 * max(1.0, evals[-1]):
        raise ValueError("model is not positive definite (zero-frequency mode)")
    sq = (V * np.sqrt(evals)) @ V.T
    isq = (V / np.sqrt(evals)) @ V.T
    n = A.shape[0] // 2
    K = sq @ symplectic_form(n) @ sq
    s, U = np.linalg.eigh(-K @ K)
    s = np.clip(s, 0.0, None)
    omega = np.sqrt(s)
    g = omega * coth_factor(omega, beta)
    G = (U * g) @ U.T
    C = 0.5 * HBAR * isq @ G @ isq
    return 0.5 * (C + C.T)


def thermal_state(model: QuadraticModel, beta: float, method: str = "auto") -> GaussianState:
    """Gibbs state of the full model at inverse temperature ``beta`` (inf for T = 0).

    ``method`` is ``"dense"`` (matrix functions of the coefficient matrix),
    ``"modes"`` (normal modes of the star Hessian) or ``"auto"``.
    """
    beta = _check_beta(beta)
    n = model.n_modes
    if method == "auto":
        method = "dense" if n <= 300 else "modes"
    if method == "dense":
        cov = thermal_covariance_dense(model.coefficient_matrix, beta)
    elif method == "modes":
        cov = _thermal_covariance_modes(model, beta)
    else:
        raise ValueError(f"unknown method {method!r}")
    return GaussianState(np.zeros(2 * n), cov, model.layout)


def normal_mode_variances(spectrum: StarSpectrum, beta: float):
    """Working-coordinate variances of each normal mode: <x^2> and <pi^2>."""
    om = np.sqrt(spectrum.eigenvalues)
    ct = coth_factor(om, beta)
    return 0.5 * HBAR * ct / om, 0.5 * HBAR * om * ct


def _thermal_covariance_modes(model: QuadraticModel, beta: float) -> np.ndarray:
    spec = model.spectrum
    if spec.eigenvalues[0] <= 0:
        raise ValueError("model is not positive definite (zero-frequency mode)")
    E = spec.eigenvectors()
    vx, vp = normal_mode_variances(spec, beta)
    Cxx = (E * vx) @ E.T
    Cpp = (E * vp) @ E.T
    a, b, c, d = model.working_maps()
    n = model.n_modes
    cov = np.empty((2 * n, 2 * n))
    cov[:n, :n] = np.outer(a, a) * Cxx + np.outer(b, b) * Cpp
    cov[n:, n:] = np.outer(c, c) * Cxx + np.outer(d, d) * Cpp
    cov[:n, n:] = np.outer(a, c) * Cxx + np.outer(b, d) * Cpp
    cov[n:, :n] = cov[:n, n:].T
    return cov


def oscillator_thermal_covariance(mass: float, frequency: float, beta: float) -> np.ndarray:
    ct = coth_factor(np.array([frequency]), beta)[0]
    return 0.5 * HBAR * ct * np.diag([1.0 / (mass * frequency), mass * frequency])


def bath_product_state(model: QuadraticModel, bath_betas: dict, system: GaussianState | None = None) -> GaussianState:
    """System state times independent thermal bath modes (uncoupled Gibbs states)."""
    n = model.n_modes
    m, w, _, mom = model._mode_arrays
    if system is None:
        system = system_state(np.eye(2) * 0.5 * HBAR)
    xx = np.zeros(n)
    pp = np.zeros(n)
    for b in model.baths:
        sl = model.bath_slice(b.label)
        ct = coth_factor(w[sl.start - 1:sl.stop - 1], bath_betas[b.label])
        mm = m[sl.start - 1:sl.stop - 1]
        ww = w[sl.start - 1:sl.stop - 1]
        xx[sl] = 0.5 * HBAR * ct / (mm * ww)
        pp[sl] = 0.5 * HBAR * ct * mm * ww
    cov = np.diag(np.concatenate([xx, pp]))
    cov[np.ix_([0, n], [0, n])] = system.covariance
    mean = np.zeros(2 * n)
    mean[[0, n]] = system.mean
    return GaussianState(mean, cov, model.layout)
