import numpy as np
import pytest

from qbmexact.baths import SpectralDensitySpec
from qbmexact.equilibrium import (
    basis_change,
    effective_parameters,
    equilibrium_variances,
    stationary_density_matrix,
)
from qbmexact.fock import FockBasis, propagator_tensor
from qbmexact.gaussian_dynamics import StarPropagation
from qbmexact.quadratic_model import assemble
from qbmexact.scenarios import (
    BETA_TB_LOW,
    THERMALIZATION_BETAS,
    TAU_BB,
    BathSetup,
    InitialSystem,
    ScenarioPreset,
    _hybrid_scheme,
    build_models,
    convergence_delta,
    second_bath_preset,
    run_preset,
    tb_setup,
)


def test_uncoupled_thermalization_stays_in_ground_state():
    tb = BathSetup(SpectralDensitySpec.ohmic_drude(0.0, 20.0), 1.0, _hybrid_scheme(50, 200.0))
    res = run_preset(ScenarioPreset("free", tb, np.linspace(0, 30, 16)))
    pops = res.populations()
    assert np.max(np.abs(pops[:, 0] - 1.0)) < 1e-12
    assert np.max(np.abs(pops[:, 1:])) < 1e-12


def test_thermalization_reaches_effective_equilibrium(thermalization_runs):
    for beta, res in thermalization_runs.items():
        assert res.checks["asymptote_vs_rho_beta"]["passed"], beta
        assert res.passed
        assert res.kind == "thermalization"
        np.testing.assert_allclose(res.tensor_slices[(1, 1, 0, 0)].real, res.populations()[:, 1], atol=1e-15)


def test_correlated_equilibrium_is_stationary():
    preset = ScenarioPreset("stat", tb_setup(), np.linspace(0, 20, 41))
    first, _ = build_models(preset)
    states = StarPropagation(first).correlated_system_states(preset.time_grid, first, BETA_TB_LOW, {})
    C = np.array([s.covariance for s in states])
    assert np.max(np.abs(C - C[0])) < 1e-10


def test_zero_second_coupling_keeps_everything_constant():
    second = BathSetup(SpectralDensitySpec.ohmic_drude(0.0, 40.0), BETA_TB_LOW / 2, _hybrid_scheme(200, 400.0), "TB2")
    preset = ScenarioPreset("zero", tb_setup(n=500), np.linspace(0, 20, 11), second,
                            InitialSystem.EFFECTIVE_EQUILIBRIUM)
    res = run_preset(preset)
    E = np.array([r.elements for r in res.exact])
    assert np.max(np.abs(E - E[0])) < 1e-6


def test_second_bath_preset(second_bath_run):
    res = second_bath_run
    assert res.passed
    assert res.kind == "second_bath"
    rho02 = np.max(np.abs(res.element_series(0, 2)))
    assert 10**-1.5 < rho02 < 10**-0.5
    assert np.max(np.abs(res.element_series(1, 3))) > 1e-2
    assert res.metadata["max_ground_population_deviation"] < 0.05
    assert res.metadata["quadrature_order"] == 41


def equal_temperature_run():
    tb = tb_setup(n=2000)
    twin = BathSetup(tb.spec, tb.beta, tb.scheme, "TB2")
    preset = ScenarioPreset("twin", tb, np.linspace(0, 500, 51), twin, InitialSystem.EFFECTIVE_EQUILIBRIUM)
    return preset, run_preset(preset)


@pytest.fixture(scope="module")
def twin_run():
    return equal_temperature_run()


def test_equal_temperature_twin_bath_relaxes_to_joint_equilibrium(twin_run):
    """A second identical bath at the same temperature doubles the damping: the
    system moves from the S+TB Gibbs state to the S+TB+TB2 Gibbs state."""
    preset, res = twin_run
    _, full = build_models(preset)
    joint = stationary_density_matrix(effective_parameters(equilibrium_variances(full, preset.tb.beta)),
                                      FockBasis(20))
    assert np.max(np.abs(res.exact[-1].elements - joint.elements)) < 1e-3


@pytest.mark.xfail(strict=True, reason="an added bath changes the reduced equilibrium even at equal temperature")
def test_equal_temperature_twin_bath_keeps_populations(twin_run):
    _, res = twin_run
    pops = res.populations()
    assert np.max(np.abs(pops - pops[0])) < 1e-4


def effective_basis_offdiagonal(t):
    """Largest |J_{kk; ab}| with a != b of the factorized-start channel in the effective basis."""
    preset = second_bath_preset(2000)
    first, full = build_models(preset)
    eff = effective_parameters(equilibrium_variances(first, preset.tb.beta))
    basis = FockBasis(30)
    ch = StarPropagation(full).channels([t], {"TB": preset.tb.beta, "TB2": preset.second.beta})[0]
    J = propagator_tensor(ch, basis).entries
    U = basis_change(eff, basis, 6, n_bare=30)
    Je = np.einsum("nk,ml,nmab,ac,bd->klcd", U, U, J, U, U)
    k = np.arange(7)
    diag_out = Je[k, k]
    off = ~np.eye(7, dtype=bool)
    return float(np.max(np.abs(diag_out[:, off])))


def test_effective_basis_coherences_do_not_feed_populations(second_bath_run):
    """rho_beta has no effective-basis coherences, so secular and full contraction coincide there."""
    preset = second_bath_preset(2000, t_max=20.0, n_t=3)
    first, full = build_models(preset)
    eff = effective_parameters(equilibrium_variances(first, preset.tb.beta))
    basis = FockBasis(20)
    rho = stationary_density_matrix(eff, basis)
    U = basis_change(eff, basis, 10)
    ch = StarPropagation(full).channels([20.0], {"TB": preset.tb.beta, "TB2": preset.second.beta})[0]
    J = propagator_tensor(ch, basis).entries
    out = np.einsum("nmab,ab->nm", J, rho.elements)
    out_eff = U.T @ out @ U
    rho_eff_diag = np.diag(np.diag(U.T @ rho.elements @ U))
    out_diag = np.einsum("nmab,ab->nm", J, U @ rho_eff_diag @ U.T)
    assert np.max(np.abs(np.diag(out_eff) - np.diag(U.T @ out_diag @ U))) < 1e-6


@pytest.mark.xfail(strict=True, reason="effective-basis coherence couplings decay in time but are 5e-2 at t = 5")
def test_effective_basis_coherence_tensor_vanishes():
    assert max(effective_basis_offdiagonal(t) for t in (5.0, 20.0)) < 1e-6


def test_blackbody_presets(blackbody_runs):
    phys = blackbody_runs["physical"]
    assert phys.passed
    assert phys.metadata["radiation_damping_rate"] == pytest.approx(TAU_BB, rel=1e-12)
    assert phys.metadata["max_population_change"] < 1e-4
    art = blackbody_runs["artificial"]
    assert art.metadata["radiation_damping_rate"] is None
    assert art.metadata["turn_on_jump"] > 10 * phys.metadata["turn_on_jump"]


@pytest.mark.xfail(strict=True, reason="UV dressing of the artificial cutoff pushes weight far above n_max = 20")
def test_artificial_blackbody_stays_in_truncation(blackbody_runs):
    assert blackbody_runs["artificial"].checks["leakage"]["passed"]


def test_convergence_delta_is_zero_for_identical_runs(thermalization_runs):
    res = thermalization_runs[THERMALIZATION_BETAS[0]]
    assert convergence_delta(res, res) == 0.0


def test_preset_validation():
    tb = tb_setup(n=10)
    with pytest.raises(ValueError):
        ScenarioPreset("x", tb, np.array([0.5, 1.0]))
    with pytest.raises(ValueError):
        ScenarioPreset("x", tb, np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        ScenarioPreset("x", tb, np.array([0.0, 1.0]), BathSetup(tb.spec, 1.0, tb.scheme, "TB"))
    with pytest.raises(ValueError):
        ScenarioPreset("x", tb, np.array([0.0, 1.0]), quadrature_factor=0)
    with pytest.raises(ValueError):
        BathSetup(tb.spec, 0.0)
    doubled = second_bath_preset(2000).with_mode_factor(2)
    assert doubled.tb.scheme.mode_count == 4000 and doubled.second.scheme.mode_count == 4000
