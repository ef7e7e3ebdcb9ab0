"""Spectral densities, damping kernels and bath discretization."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BathKind(str, enum.Enum):
    OHMIC_DRUDE = "OhmicDrude"
    BLACKBODY = "Blackbody"


class CouplingType(str, enum.Enum):
    POSITION = "Position"
    MOMENTUM = "Momentum"


class NodeRule(str, enum.Enum):
    LINEAR = "Linear"
    LOGARITHMIC = "Logarithmic"
    HYBRID = "Hybrid"  # uniform up to a knee frequency, geometric above


# relative slack for treating a blackbody cutoff as sitting on the causality bound
CAUSAL_LIMIT_RTOL = 1e-12


@dataclass(frozen=True)
class SpectralDensitySpec:
    """Parametrized bath spectral density.

    ``coupling_strength`` is the damping rate gamma for an Ohmic-Drude bath and
    the radiative time constant tau for a blackbody bath. ``mass`` is the bare
    system mass; the blackbody density uses the renormalized mass
    ``reference_mass = mass / (1 - tau * cutoff)``. ``reference_frequency`` is
    the system frequency used by the constant-kernel estimate at the
    causality bound.
    """

    kind: BathKind
    coupling_strength: float
    cutoff: float
    mass: float = 1.0
    reference_frequency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BathKind(self.kind))
        for name in ("coupling_strength", "cutoff", "mass", "reference_frequency"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.coupling_strength < 0:
            raise ValueError("coupling_strength must be non-negative")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.mass <= 0 or self.reference_frequency <= 0:
            raise ValueError("mass and reference_frequency must be positive")
        if self.kind is BathKind.BLACKBODY and self.coupling_strength > 0:
            bound = 1.0 / self.coupling_strength
            if self.cutoff > bound:
                raise ValueError(
                    f"blackbody cutoff {self.cutoff!r} exceeds the causality bound 1/tau_bb = {bound!r}"
                )

    @classmethod
    def ohmic_drude(cls, gamma: float, cutoff: float, mass: float = 1.0) -> "SpectralDensitySpec":
        return cls(BathKind.OHMIC_DRUDE, gamma, cutoff, mass)

    @classmethod
    def blackbody(cls, tau_bb: float, cutoff: float | None = None, mass: float = 1.0,
                  reference_frequency: float = 1.0) -> "SpectralDensitySpec":
        """Blackbody bath; ``cutoff=None`` places it on the causality bound 1/tau_bb."""
        if cutoff is None:
            cutoff = 1.0 / tau_bb
        return cls(BathKind.BLACKBODY, tau_bb, cutoff, mass, reference_frequency)

    @property
    def coupling_type(self) -> CouplingType:
        return CouplingType.MOMENTUM if self.kind is BathKind.BLACKBODY else CouplingType.POSITION

    @property
    def at_causal_limit(self) -> bool:
        return (
            self.kind is BathKind.BLACKBODY
            and self.coupling_strength * self.cutoff >= 1.0 - CAUSAL_LIMIT_RTOL
        )

    @property
    def reference_mass(self) -> float:
        """m for Ohmic-Drude, the renormalized M = m / (1 - tau*cutoff) for blackbody."""
        if self.kind is BathKind.OHMIC_DRUDE:
            return self.mass
        if self.at_causal_limit:
            return float("inf")
        return self.mass / (1.0 - self.coupling_strength * self.cutoff)

    @property
    def constant_kernel_rate(self) -> float:
        """Blackbody damping estimated by a constant kernel, gamma = omega0**2 * tau."""
        if self.kind is not BathKind.BLACKBODY:
            raise ValueError("constant-kernel rate is defined for blackbody baths only")
        return self.reference_frequency**2 * self.coupling_strength

    @property
    def effective_damping_rate(self) -> float:
        """Rate entering the Ohmic form actually used to build bath modes."""
        if self.kind is BathKind.OHMIC_DRUDE:
            return self.coupling_strength
        if self.at_causal_limit:
            return self.constant_kernel_rate
        raise ValueError("a blackbody bath below the causality bound has no constant rate")


def evaluate_spectral_density(spec: SpectralDensitySpec, omega):
    """J(omega). At the blackbody causality bound, where the renormalized mass
    diverges, the constant-kernel Ohmic form m*gamma_bb*omega*Drude is returned."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("spectral density needs finite omega >= 0")
    drude = spec.cutoff**2 / (spec.cutoff**2 + w**2)
    if spec.kind is BathKind.OHMIC_DRUDE or spec.at_causal_limit:
        out = spec.mass * spec.effective_damping_rate * w * drude
    else:
        out = spec.reference_mass * spec.coupling_strength * w**3 * drude
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelValue:
    """Damping kernel split into a smooth part and the weight of a delta at t = 0."""

    smooth: np.ndarray | float
    delta_weight: float = 0.0


def damping_kernel(spec: SpectralDensitySpec, t) -> KernelValue:
    t = np.asarray(t, dtype=float)
    om = spec.cutoff
    decay = np.exp(-om * np.abs(t))
    if spec.kind is BathKind.OHMIC_DRUDE:
        smooth = spec.coupling_strength * om * decay
        delta = 0.0
    else:
        tau = spec.coupling_strength
        smooth = -tau * om**3 * decay
        delta = 2.0 * tau * om**2
    return KernelValue(smooth if smooth.ndim else float(smooth), delta)


def kernel_integral(spec: SpectralDensitySpec) -> float:
    """Integral of the full kernel over the real line (delta weight included)."""
    if spec.kind is BathKind.OHMIC_DRUDE:
        return 2.0 * spec.coupling_strength
    tau, om = spec.coupling_strength, spec.cutoff
    return 2.0 * tau * om**2 - 2.0 * tau * om**2


@dataclass(frozen=True)
class BathMode:
    mass: float
    frequency: float
    coupling: float
    coupling_type: CouplingType

    def __post_init__(self):
        if not (self.mass > 0 and self.frequency > 0):
            raise ValueError("bath modes need positive mass and frequency")


@dataclass(frozen=True)
class DiscretizationScheme:
    node_rule: NodeRule = NodeRule.LOGARITHMIC
    mode_count: int = 2000
    frequency_ceiling: float | None = None  # default 10 x cutoff
    frequency_floor: float | None = None  # logarithmic rule only; default 1e-4 x min(1, cutoff)
    frequency_knee: float | None = None  # hybrid rule only; default min(2, cutoff / 2)

    def __post_init__(self):
        object.__setattr__(self, "node_rule", NodeRule(self.node_rule))
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise ValueError(f"mode_count must be a positive integer, got {self.mode_count!r}")
        for name in ("frequency_ceiling", "frequency_floor", "frequency_knee"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")

    def ceiling_for(self, spec: SpectralDensitySpec) -> float:
        w_max = 10.0 * spec.cutoff if self.frequency_ceiling is None else self.frequency_ceiling
        if not w_max > spec.cutoff:
            raise ValueError("frequency ceiling must lie strictly above the cutoff")
        return w_max

    def floor_for(self, spec: SpectralDensitySpec) -> float:
        if self.frequency_floor is not None:
            return self.frequency_floor
        return 1e-4 * min(1.0, spec.cutoff)

    def knee_for(self, spec: SpectralDensitySpec) -> float:
        if self.frequency_knee is not None:
            return self.frequency_knee
        return min(2.0 * spec.reference_frequency, 0.5 * spec.cutoff)

    def nodes(self, spec: SpectralDensitySpec) -> tuple[np.ndarray, np.ndarray]:
        """Node frequencies and their quadrature widths."""
        n = int(self.mode_count)
        w_max = self.ceiling_for(spec)
        if self.node_rule is NodeRule.LINEAR:
            dw = w_max / n
            w = (np.arange(n) + 0.5) * dw
            return w, np.full(n, dw)
        if self.node_rule is NodeRule.HYBRID:
            knee = self.knee_for(spec)
            if not 0 < knee < w_max:
                raise ValueError("frequency knee must lie between 0 and the ceiling")
            # equal spacing below the knee, the same relative spacing above it
            n_lin = int(round(n / (1.0 + np.log(w_max / knee))))
            n_lin = min(max(n_lin, 1), n - 1) if n > 1 else n
            n_log = n - n_lin
            dw = knee / n_lin
            w_lin = (np.arange(n_lin) + 0.5) * dw
            if n_log == 0:
                return w_lin, np.full(n_lin, dw)
            h = np.log(w_max / knee) / n_log
            w_log = knee * np.exp((np.arange(n_log) + 0.5) * h)
            return np.concatenate([w_lin, w_log]), np.concatenate([np.full(n_lin, dw), w_log * h])
        w_min = self.floor_for(spec)
        if not w_min < w_max:
            raise ValueError("frequency floor must lie below the ceiling")
        # midpoint rule in ln(omega): d(omega) = omega * d(ln omega)
        h = np.log(w_max / w_min) / n
        w = w_min * np.exp((np.arange(n) + 0.5) * h)
        return w, w * h


@dataclass(frozen=True)
class BathModes:
    """Discretized bath as parallel arrays. Iterating yields ``BathMode`` records."""

    masses: np.ndarray
    frequencies: np.ndarray
    couplings: np.ndarray
    coupling_type: CouplingType
    weights: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return self.frequencies.size

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> BathMode:
        return BathMode(float(self.masses[i]), float(self.frequencies[i]),
                        float(self.couplings[i]), self.coupling_type)

    @classmethod
    def from_modes(cls, modes) -> "BathModes":
        modes = list(modes)
        if not modes:
            raise ValueError("empty mode list")
        kinds = {m.coupling_type for m in modes}
        if len(kinds) != 1:
            raise ValueError("a bath cannot mix position- and momentum-coupled modes")
        return cls(
            np.array([m.mass for m in modes], dtype=float),
            np.array([m.frequency for m in modes], dtype=float),
            np.array([m.coupling for m in modes], dtype=float),
            kinds.pop(),
        )

    @property
    def position_couplings(self) -> np.ndarray:
        """Couplings c_j of the equivalent position-coupled bath.

        A momentum term (p_k + m_k w_k q)**2 / 2 m_k maps, under
        Q_k = p_k/(m_k w_k), P_k = -m_k w_k q_k, onto a position-coupled
        mode with c_k = -m_k w_k**2.
        """
        if self.coupling_type is CouplingType.POSITION:
            return self.couplings
        return -self.couplings * self.frequencies

    def spectral_weights(self) -> np.ndarray:
        """pi c_j**2 / (2 m_j w_j): the delta-function weights of the discrete J."""
        c = self.position_couplings
        return np.pi * c**2 / (2.0 * self.masses * self.frequencies)

    def reconstructed_kernel(self, t, system_mass: float = 1.0):
        """sum_j c_j**2 / (m_j w_j**2 m) cos(w_j t)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        c = self.position_couplings
        amp = c**2 / (self.masses * self.frequencies**2 * system_mass)
        out = np.cos(np.outer(t, self.frequencies)) @ amp
        return out


def discretize_bath(spec: SpectralDensitySpec, scheme: DiscretizationScheme,
                    mode_mass: float | None = None) -> BathModes:
    """Discrete modes whose delta-comb reproduces J(omega) under the midpoint rule.

    Position modes get c_j**2 = (2/pi) m_j w_j J(w_j) dw_j with m_j defaulting to
    the system mass. Momentum modes carry coupling m_k w_k with
    m_k = (2/pi) J(w_k) dw_k / w_k**3.
    """
    w, dw = scheme.nodes(spec)
    J = evaluate_spectral_density(spec, w)
    if spec.coupling_type is CouplingType.POSITION:
        m = np.full(w.size, spec.mass if mode_mass is None else mode_mass)
        c = np.sqrt(2.0 / np.pi * m * w * J * dw)
        return BathModes(m, w, c, CouplingType.POSITION, dw)
    m = 2.0 / np.pi * J * dw / w**3
    if np.any(m <= 0):
        raise ValueError("blackbody modes need a positive coupling strength")
    return BathModes(m, w, m * w, CouplingType.MOMENTUM, dw)
