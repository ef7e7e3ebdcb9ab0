import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbmexact.normal_modes import star_spectrum


def _check_against_eigh(spec, tol=1e-12):
    W = spec.dense_hessian()
    ref = np.linalg.eigvalsh(W)
    np.testing.assert_allclose(spec.eigenvalues, ref, rtol=tol, atol=tol * ref[-1])
    E = spec.eigenvectors()
    scale = np.max(np.abs(W))
    assert np.max(np.abs(W @ E - E * spec.eigenvalues)) < 50 * tol * scale
    assert np.max(np.abs(E.T @ E - np.eye(E.shape[1]))) < 1e-12


def test_matches_dense_eigh_for_drude_like_bath():
    d = np.linspace(0.05, 40.0, 300) ** 2
    w = 0.05 * np.sqrt(d) * np.exp(-np.sqrt(d) / 20)
    _check_against_eigh(star_spectrum(1.0, d, w))


def test_duplicate_poles_and_zero_couplings_are_deflated():
    d = np.array([0.5, 1.0, 1.0, 1.0, 2.0, 3.0])
    w = np.array([0.1, 0.2, 0.05, 0.0, 0.3, 0.0])
    spec = star_spectrum(1.0, d, w)
    _check_against_eigh(spec)
    assert spec.size == 7


def test_empty_bath_is_the_bare_oscillator():
    spec = star_spectrum(2.25, np.zeros(0), np.zeros(0))
    assert spec.eigenvalues.tolist() == [2.25]
    assert spec.eigenvectors().tolist() == [[1.0]]


def test_unsorted_input_order_is_respected():
    rng = np.random.default_rng(3)
    d = rng.uniform(0.1, 9.0, 40)
    w = rng.normal(0, 0.2, 40)
    spec = star_spectrum(1.3, d, w)
    _check_against_eigh(spec)
    rows = spec.eigenvectors(rows=[0, 5, 17])
    np.testing.assert_array_equal(rows, spec.eigenvectors()[[0, 5, 17]])


def test_system_weights_sum_to_one():
    d = np.geomspace(1e-4, 1e4, 500)
    w = 0.1 * np.sqrt(d)
    spec = star_spectrum(1.0, d, w)
    assert np.sum(spec.system_weights**2) == pytest.approx(1.0, abs=1e-12)
    assert np.all(spec.eigenvalues > 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 60), seed=st.integers(0, 2**31), spread=st.floats(0.5, 6.0))
def test_random_arrowheads(n, seed, spread):
    rng = np.random.default_rng(seed)
    d = np.exp(rng.uniform(-spread, spread, n))
    w = rng.normal(0, 1, n) * np.sqrt(d) * rng.uniform(0, 0.5)
    _check_against_eigh(star_spectrum(rng.uniform(0.2, 3.0), d, w), tol=1e-10)
