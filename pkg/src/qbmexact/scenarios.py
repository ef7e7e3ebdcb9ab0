"""End-to-end runs: thermalization with one bath, then a second thermal or radiation bath.

All runs are exact at the Gaussian level. Fock-basis quantities are
obtained by projecting the evolved system Gaussian (``exact``) or by
contracting channel tensors with a Fock-basis initial state (``secular``).
"""

from __future__ import annotations

import enum
import logging
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .baths import BathKind, DiscretizationScheme, SpectralDensitySpec, discretize_bath
from .equilibrium import (
    EffectiveOscillator,
    effective_parameters,
    equilibrium_variances,
    matsubara_variances,
    stationary_density_matrix,
)
from .fock import (
    FockBasis,
    FockDensityMatrix,
    PropagatorTensor,
    gaussian_to_fock,
    propagator_tensor,
    secular_evolve,
)
from .gaussian_dynamics import StarPropagation
from .quadratic_model import (
    QuadraticModel,
    SystemOscillator,
    assemble,
    oscillator_thermal_covariance,
    system_state,
)

log = logging.getLogger(__name__)

FIRST_LABEL = "TB"
RELAXED_GAMMA_T = 20.0  # gamma t beyond which a thermalization run counts as relaxed


class InitialSystem(str, enum.Enum):
    GROUND = "Ground"
    EFFECTIVE_EQUILIBRIUM = "EffectiveEquilibrium"
    CANONICAL_BARE = "CanonicalBare"


@dataclass(frozen=True)
class BathSetup:
    spec: SpectralDensitySpec
    beta: float
    scheme: DiscretizationScheme = field(default_factory=DiscretizationScheme)
    label: str = FIRST_LABEL

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("bath inverse temperature must be positive")

    def modes(self):
        return discretize_bath(self.spec, self.scheme)


@dataclass(frozen=True)
class ScenarioPreset:
    label: str
    tb: BathSetup
    time_grid: np.ndarray
    second: BathSetup | None = None
    initial_system: InitialSystem = InitialSystem.GROUND
    n_max: int = 20
    quadrature_factor: int = 1  # multiple of the exact tensor quadrature order
    system: SystemOscillator = field(default_factory=SystemOscillator)
    # (n, m) output elements and (nu, mu) inputs recorded as tensor slices
    slice_outputs: tuple = ((0, 0), (1, 1), (2, 2), (0, 2), (1, 3))
    slice_inputs: tuple = tuple((a, b) for a in range(4) for b in range(4))

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
            raise ValueError("time_grid must be finite, start at 0 and be strictly increasing")
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "initial_system", InitialSystem(self.initial_system))
        if self.second is not None and self.second.label == self.tb.label:
            raise ValueError("the two baths need distinct labels")
        FockBasis(self.n_max)
        if int(self.quadrature_factor) != self.quadrature_factor or self.quadrature_factor < 1:
            raise ValueError("quadrature_factor must be a positive integer")

    @property
    def kind(self) -> str:
        if self.second is None:
            return "thermalization"
        return "blackbody" if self.second.spec.kind is BathKind.BLACKBODY else "second_bath"

    def with_mode_factor(self, factor: float) -> "ScenarioPreset":
        def scale(b: BathSetup | None):
            if b is None:
                return None
            n = int(round(b.scheme.mode_count * factor))
            return replace(b, scheme=replace(b.scheme, mode_count=n))

        return replace(self, tb=scale(self.tb), second=scale(self.second))


@dataclass
class ScenarioResult:
    label: str
    kind: str
    times: np.ndarray
    exact: list[FockDensityMatrix]
    secular: list[FockDensityMatrix] | None = None
    canonical: list[FockDensityMatrix] | None = None
    tensor_slices: dict = field(default_factory=dict)  # (n, m, nu, mu) -> complex array over t
    equilibrium: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)  # name -> {"value", "tol", "passed"}

    def populations(self, variant: str = "exact") -> np.ndarray:
        mats = getattr(self, variant)
        return np.array([r.populations() for r in mats])

    def element_series(self, n: int, m: int, variant: str = "exact") -> np.ndarray:
        return np.array([r.elements[n, m] for r in getattr(self, variant)])

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def add_check(self, name: str, value: float, tol: float, below: bool = True):
        ok = bool(np.isfinite(value) and (value < tol if below else value > tol))
        self.checks[name] = {"value": float(value), "tol": float(tol), "passed": ok}


def build_models(preset: ScenarioPreset) -> tuple[QuadraticModel, QuadraticModel | None]:
    """(S + first bath, S + both baths or None)."""
    tb_modes = preset.tb.modes()
    first = assemble(preset.system, [(preset.tb.label, preset.tb.spec, tb_modes)])
    if preset.second is None:
        return first, None
    full = assemble(preset.system, [
        (preset.tb.label, preset.tb.spec, tb_modes),
        (preset.second.label, preset.second.spec, preset.second.modes()),
    ])
    return first, full


def _to_fock(states, basis: FockBasis) -> list[FockDensityMatrix]:
    return [gaussian_to_fock(s, basis) for s in states]


def _equilibrium_report(first: QuadraticModel, preset: ScenarioPreset, basis: FockBasis):
    v = equilibrium_variances(first, preset.tb.beta)
    eff = effective_parameters(v)
    rho_beta = stationary_density_matrix(eff, basis)
    rep = {
        "q2": v.q2,
        "p2": v.p2,
        "m_eff": eff.mass,
        "omega_eff": eff.frequency,
        "rho_beta": rho_beta,
    }
    spec = preset.tb.spec
    if spec.kind is BathKind.OHMIC_DRUDE and np.isfinite(preset.tb.beta):
        mv = matsubara_variances(spec, preset.system, preset.tb.beta)
        rep["q2_matsubara"] = mv.q2
        rep["p2_matsubara"] = mv.p2
    return rep, eff


def _tensor_series(channels, basis, pairs, outputs, factor=1) -> tuple[dict, list[PropagatorTensor]]:
    order = factor * (2 * basis.n_max + 1)
    tensors = [propagator_tensor(ch, basis, inputs=pairs, order=order) for ch in channels]
    slices = {}
    for n, m in outputs:
        for a, b in pairs:
            slices[(n, m, a, b)] = np.array([T.entries[n, m, a, b] for T in tensors])
    return slices, tensors


def _initial_system_state(preset: ScenarioPreset, eff: EffectiveOscillator | None, v=None):
    sysm = preset.system
    if preset.initial_system is InitialSystem.GROUND:
        return system_state(oscillator_thermal_covariance(sysm.mass, sysm.frequency, np.inf))
    if preset.initial_system is InitialSystem.CANONICAL_BARE:
        return system_state(oscillator_thermal_covariance(sysm.mass, sysm.frequency, preset.tb.beta))
    if v is None:
        raise ValueError("effective-equilibrium start needs equilibrium variances")
    return system_state(np.diag([v.q2, v.p2]))


def run_thermalization(preset: ScenarioPreset) -> ScenarioResult:
    """System starts uncorrelated (default |0><0|) against the thermal first bath."""
    if preset.second is not None:
        raise ValueError("thermalization runs take a single bath")
    t0 = _time.perf_counter()
    basis = FockBasis(preset.n_max, preset.system)
    first, _ = build_models(preset)
    prop = StarPropagation(first)
    times = preset.time_grid
    channels = prop.channels(times, {preset.tb.label: preset.tb.beta})
    rep, eff = _equilibrium_report(first, preset, basis)
    v = equilibrium_variances(first, preset.tb.beta)
    start = _initial_system_state(preset, eff, v)
    exact = _to_fock([ch.apply(start) for ch in channels], basis)
    res = ScenarioResult(preset.label, preset.kind, times, exact, equilibrium=rep)
    if preset.initial_system is InitialSystem.GROUND:
        # with |0><0| the state itself is the (nm;00) slice
        for n, m in preset.slice_outputs:
            res.tensor_slices[(n, m, 0, 0)] = res.element_series(n, m)
    _finish(res, preset, first, None, t0)
    asymptote = float(np.max(np.abs(exact[-1].elements - rep["rho_beta"].elements)))
    res.metadata["final_distance_to_rho_beta"] = asymptote
    # only a gate once the run is long enough to have relaxed
    if times[-1] * preset.tb.spec.effective_damping_rate >= RELAXED_GAMMA_T:
        res.add_check("asymptote_vs_rho_beta", asymptote, 1e-3)
    return res


def _second_step(preset: ScenarioPreset) -> ScenarioResult:
    t0 = _time.perf_counter()
    basis = FockBasis(preset.n_max, preset.system)
    first, full = build_models(preset)
    times = preset.time_grid
    rep, eff = _equilibrium_report(first, preset, basis)
    prop = StarPropagation(full)
    second_label = preset.second.label
    exact_states = prop.correlated_system_states(
        times, first, preset.tb.beta, {second_label: preset.second.beta})
    exact = _to_fock(exact_states, basis)

    betas = {preset.tb.label: preset.tb.beta, second_label: preset.second.beta}
    channels = prop.channels(times, betas)
    canon_start = system_state(oscillator_thermal_covariance(
        preset.system.mass, preset.system.frequency, preset.tb.beta))
    canonical = _to_fock([ch.apply(canon_start) for ch in channels], basis)

    diag_pairs = [(k, k) for k in range(preset.n_max + 1)]
    pairs = list(dict.fromkeys(list(preset.slice_inputs) + diag_pairs))
    slices, tensors = _tensor_series(channels, basis, pairs, preset.slice_outputs,
                                     preset.quadrature_factor)
    secular = [secular_evolve(rep["rho_beta"], T) for T in tensors]

    res = ScenarioResult(preset.label, preset.kind, times, exact, secular, canonical,
                         {k: v for k, v in slices.items() if k[2:] in set(preset.slice_inputs)},
                         rep)
    _finish(res, preset, first, full, t0)
    res.metadata["quadrature_order"] = tensors[0].quadrature_order if tensors else None
    return res


def run_second_bath(preset: ScenarioPreset) -> ScenarioResult:
    """Equilibrated S + first bath, then a second Ohmic-Drude bath switched on at t = 0."""
    if preset.second is None or preset.second.spec.kind is not BathKind.OHMIC_DRUDE:
        raise ValueError("second-bath runs need an Ohmic-Drude second bath")
    res = _second_step(preset)
    p0 = [res.populations(v)[:, 0] for v in ("exact", "secular", "canonical")]
    dev = max(np.max(np.abs(p0[i] - p0[j])) for i in range(3) for j in range(i + 1, 3))
    res.metadata["max_ground_population_deviation"] = float(dev)
    return res


def run_blackbody(preset: ScenarioPreset) -> ScenarioResult:
    """Equilibrated S + first bath, then momentum-coupled radiation switched on at t = 0."""
    if preset.second is None or preset.second.spec.kind is not BathKind.BLACKBODY:
        raise ValueError("blackbody runs need a blackbody second bath")
    res = _second_step(preset)
    pops = res.populations("exact")
    res.metadata["max_population_change"] = float(np.max(np.abs(pops - pops[0])))
    res.metadata["turn_on_jump"] = turn_on_jump(preset)
    spec = preset.second.spec
    res.metadata["radiation_damping_rate"] = (
        spec.constant_kernel_rate if spec.at_causal_limit else None)
    return res


def turn_on_jump(preset: ScenarioPreset, window: float = 1.0) -> float:
    """Largest radiation-attributable deviation of J_{00;00} within ``window`` of t = 0.

    The factorized-start channel with both baths is compared with the one
    with the first bath alone, so the first bath's own initial slip cancels.
    """
    times = preset.time_grid[preset.time_grid <= window]
    basis = FockBasis(preset.n_max, preset.system)
    first, full = build_models(preset)
    ch_full = StarPropagation(full).channels(
        times, {preset.tb.label: preset.tb.beta, preset.second.label: preset.second.beta})
    ch_first = StarPropagation(first).channels(times, {preset.tb.label: preset.tb.beta})
    ground = system_state(oscillator_thermal_covariance(preset.system.mass, preset.system.frequency, np.inf))
    j_full = np.array([gaussian_to_fock(c.apply(ground), basis).elements[0, 0].real for c in ch_full])
    j_first = np.array([gaussian_to_fock(c.apply(ground), basis).elements[0, 0].real for c in ch_first])
    return float(np.max(np.abs(j_full - j_first)))


def run_preset(preset: ScenarioPreset) -> ScenarioResult:
    return {
        "thermalization": run_thermalization,
        "second_bath": run_second_bath,
        "blackbody": run_blackbody,
    }[preset.kind](preset)


def _finish(res: ScenarioResult, preset, first, full, t0):
    leak = max(r.leakage for r in res.exact)
    herm = max(r.hermiticity_error() for r in res.exact)
    min_eig = min(r.min_eigenvalue() for r in res.exact)
    res.metadata.update({
        "mode_counts": {b.label: b.size for b in (full or first).baths},
        "n_max": preset.n_max,
        "max_leakage": float(leak),
        "max_hermiticity_error": float(herm),
        "min_eigenvalue": float(min_eig),
        "runtime_s": _time.perf_counter() - t0,
    })
    res.add_check("leakage", leak, 1e-4)
    res.add_check("hermiticity", herm, 1e-10)
    res.add_check("positivity", -min_eig, 1e-8)
    finite = all(np.all(np.isfinite(r.elements)) for r in res.exact)
    res.add_check("finite", 0.0 if finite else np.inf, 0.5)


def convergence_delta(a: ScenarioResult, b: ScenarioResult) -> float:
    """Largest change of any reported Fock element between two runs on the same grid."""
    deltas = []
    for variant in ("exact", "secular", "canonical"):
        xa, xb = getattr(a, variant), getattr(b, variant)
        if xa is None or xb is None:
            continue
        deltas.append(max(np.max(np.abs(p.elements - q.elements)) for p, q in zip(xa, xb)))
    for key, series in a.tensor_slices.items():
        if key in b.tensor_slices:
            deltas.append(float(np.max(np.abs(series - b.tensor_slices[key]))))
    return float(max(deltas))


# --- shipped presets -------------------------------------------------------------------

TB_GAMMA = 0.1
TB_CUTOFF = 20.0
BETA_TB_LOW = 8.2724
THERMALIZATION_BETAS = (8.2724, 1.0341, 0.5179)
BETA_BB = 0.3884
TAU_BB = 6.24e-24 * 3.0e14  # radiative time in units of 1/omega0 at omega0 = 3e14 rad/s
BB_ARTIFICIAL_CUTOFF = 8.3e5


def _log_scheme(n: int, ceiling: float, floor: float = 1e-4) -> DiscretizationScheme:
    return DiscretizationScheme("Logarithmic", n, ceiling, floor)


def _hybrid_scheme(n: int, ceiling: float) -> DiscretizationScheme:
    return DiscretizationScheme("Hybrid", n, ceiling)


def tb_setup(gamma=TB_GAMMA, cutoff=TB_CUTOFF, beta=BETA_TB_LOW, n=2000, label=FIRST_LABEL) -> BathSetup:
    return BathSetup(SpectralDensitySpec.ohmic_drude(gamma, cutoff), beta,
                     _hybrid_scheme(n, 10.0 * cutoff), label)


def thermalization_preset(beta: float, n: int = 2000, t_max: float = 500.0, n_t: int = 501) -> ScenarioPreset:
    return ScenarioPreset(f"thermalization_beta{beta:g}", tb_setup(beta=beta, n=n),
                          np.linspace(0.0, t_max, n_t))


def second_bath_preset(n: int = 2000, t_max: float = 500.0, n_t: int = 501,
                second_beta: float = BETA_TB_LOW / 2) -> ScenarioPreset:
    second = BathSetup(SpectralDensitySpec.ohmic_drude(2 * TB_GAMMA, 2 * TB_CUTOFF), second_beta,
                       _hybrid_scheme(n, 20.0 * TB_CUTOFF), "TB2")
    return ScenarioPreset("second_bath", tb_setup(n=n), np.linspace(0.0, t_max, n_t), second,
                          InitialSystem.EFFECTIVE_EQUILIBRIUM)


def _blackbody_grid(t_max: float, n_lin: int, t_first: float) -> np.ndarray:
    early = np.geomspace(t_first, 1.0, 61)
    late = np.linspace(0.0, t_max, n_lin)
    return np.unique(np.concatenate([[0.0], early, late]))


def artificial_blackbody_preset(n: int = 2000, t_max: float = 38.0) -> ScenarioPreset:
    spec = SpectralDensitySpec.blackbody(TAU_BB, BB_ARTIFICIAL_CUTOFF)
    second = BathSetup(spec, BETA_BB, _log_scheme(n, 10.0 * BB_ARTIFICIAL_CUTOFF), "BB")
    return ScenarioPreset("blackbody_artificial_cutoff", tb_setup(n=n),
                          _blackbody_grid(t_max, 191, 1e-8), second,
                          InitialSystem.EFFECTIVE_EQUILIBRIUM)


def physical_blackbody_preset(n: int = 2000, t_max: float = 300.0) -> ScenarioPreset:
    spec = SpectralDensitySpec.blackbody(TAU_BB)  # cutoff on the causality bound
    second = BathSetup(spec, BETA_BB, _log_scheme(n, 10.0 * spec.cutoff), "BB")
    return ScenarioPreset("blackbody_physical_cutoff", tb_setup(n=n),
                          _blackbody_grid(t_max, 301, 1e-11), second,
                          InitialSystem.EFFECTIVE_EQUILIBRIUM)


def shipped_presets(n: int = 2000) -> list[ScenarioPreset]:
    return [thermalization_preset(b, n) for b in THERMALIZATION_BETAS] + [
        second_bath_preset(n), artificial_blackbody_preset(n), physical_blackbody_preset(n)]
