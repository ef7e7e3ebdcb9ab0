"""Exact discrete-mode simulation of a damped quantum oscillator in the energy basis."""

__version__ = "0.1.0"

from .baths import (
    BathKind,
    BathModes,
    CouplingType,
    DiscretizationScheme,
    NodeRule,
    SpectralDensitySpec,
    damping_kernel,
    discretize_bath,
    evaluate_spectral_density,
)
from .equilibrium import (
    EffectiveOscillator,
    EquilibriumVariances,
    effective_parameters,
    equilibrium_variances,
    matsubara_variances,
    stationary_density_matrix,
)
from .fock import (
    FockBasis,
    FockDensityMatrix,
    PropagatorTensor,
    evolve_density_matrix,
    gaussian_to_fock,
    propagator_tensor,
    secular_evolve,
)
from .gaussian_dynamics import GaussianChannel, StarPropagation, evolve, extract_channel, reduce_to_system
from .quadratic_model import (
    GaussianState,
    QuadraticModel,
    SystemOscillator,
    assemble,
    compose_product,
    thermal_state,
)
from .units import thermal_correlation_time

__all__ = [
    "BathKind", "BathModes", "CouplingType", "DiscretizationScheme", "NodeRule", "SpectralDensitySpec",
    "damping_kernel", "discretize_bath", "evaluate_spectral_density",
    "EffectiveOscillator", "EquilibriumVariances", "effective_parameters", "equilibrium_variances",
    "matsubara_variances", "stationary_density_matrix",
    "FockBasis", "FockDensityMatrix", "PropagatorTensor", "evolve_density_matrix", "gaussian_to_fock",
    "propagator_tensor", "secular_evolve",
    "GaussianChannel", "StarPropagation", "evolve", "extract_channel", "reduce_to_system",
    "GaussianState", "QuadraticModel", "SystemOscillator", "assemble", "compose_product", "thermal_state",
    "thermal_correlation_time",
]
