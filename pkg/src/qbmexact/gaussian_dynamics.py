"""Exact evolution of Gaussian states and the reduced system channel."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .quadratic_model import (
    GaussianState,
    QuadraticModel,
    SYSTEM_LABEL,
    bath_product_state,
    normal_mode_variances,
    symplectic_form,
    system_state,
)
from .units import HBAR, coth_factor

OMEGA2 = symplectic_form(1)
_TIME_BATCH_ELEMS = 4_000_000


class SymplecticPropagator:
    """exp(t * Omega A) for a positive definite coefficient matrix.

    With y = A^{1/2} z the generator becomes the antisymmetric
    K = A^{1/2} Omega A^{1/2}; iK is Hermitian, so a single ``eigh`` gives
    the propagator at every t.
    """

    def __init__(self, A: np.ndarray):
        A = 0.5 * (A + A.T)
        evals, V = np.linalg.eigh(A)
        if evals[0] <= 0:
            raise ValueError("coefficient matrix must be positive definite")
        self.A = A
        self.n_modes = A.shape[0] // 2
        self._sq = (V * np.sqrt(evals)) @ V.T
        self._isq = (V / np.sqrt(evals)) @ V.T
        K = self._sq @ symplectic_form(self.n_modes) @ self._sq
        self._lam, self._U = np.linalg.eigh(1j * K)

    @property
    def generator(self) -> np.ndarray:
        return symplectic_form(self.n_modes) @ self.A

    def __call__(self, t: float) -> np.ndarray:
        if not np.isfinite(t):
            raise ValueError("time must be finite")
        phase = np.exp(-1j * self._lam * t)
        expK = ((self._U * phase) @ self._U.conj().T).real
        return self._isq @ expK @ self._sq

    def expm(self, t: float) -> np.ndarray:
        """Scaling-and-squaring route, for cross-checks."""
        return scipy.linalg.expm(t * self.generator)


def propagator(model: QuadraticModel) -> SymplecticPropagator:
    cached = model.__dict__.get("_symplectic_propagator")
    if cached is None:
        cached = SymplecticPropagator(model.coefficient_matrix)
        model.__dict__["_symplectic_propagator"] = cached
    return cached


def evolve(state: GaussianState, model: QuadraticModel, t: float) -> GaussianState:
    if state.n_modes != model.n_modes:
        raise ValueError("state and model dimensions differ")
    S = propagator(model)(t)
    cov = S @ state.covariance @ S.T
    return GaussianState(S @ state.mean, 0.5 * (cov + cov.T), state.layout)


def reduce_to_system(state: GaussianState) -> GaussianState:
    labels = [lab for lab, _ in state.layout]
    if SYSTEM_LABEL not in labels:
        raise ValueError("state has no system block")
    start = 0
    for lab, k in state.layout:
        if lab == SYSTEM_LABEL:
            break
        start += k
    idx = [start, state.n_modes + start]
    return system_state(state.covariance[np.ix_(idx, idx)], state.mean[idx])


@dataclass(frozen=True, eq=False)
class GaussianChannel:
    """Reduced map: mean -> drift @ mean, covariance -> drift C drift^T + noise."""

    drift: np.ndarray
    noise: np.ndarray
    time: float = 0.0

    def apply(self, state: GaussianState) -> GaussianState:
        if state.n_modes != 1:
            raise ValueError("channels act on single-mode system states")
        L = self.drift
        cov = L @ state.covariance @ L.T + self.noise
        return system_state(0.5 * (cov + cov.T), L @ state.mean)

    def then(self, later: "GaussianChannel") -> "GaussianChannel":
        """Sequential composition: ``self`` first, ``later`` second."""
        L2 = later.drift
        return GaussianChannel(L2 @ self.drift, L2 @ self.noise @ L2.T + later.noise,
                               self.time + later.time)

    def positivity_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of N + (i hbar/2)(Omega - L Omega L^T); all >= 0 for a CP map."""
        L = self.drift
        M = self.noise + 0.5j * HBAR * (OMEGA2 - L @ OMEGA2 @ L.T)
        return np.linalg.eigvalsh(M)

    def is_completely_positive(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.positivity_eigenvalues() >= -tol))

    @classmethod
    def identity(cls) -> "GaussianChannel":
        return cls(np.eye(2), np.zeros((2, 2)), 0.0)


def _bath_betas(model: QuadraticModel, bath_betas) -> dict:
    if isinstance(bath_betas, dict):
        missing = [b.label for b in model.baths if b.label not in bath_betas]
        if missing:
            raise ValueError(f"missing temperatures for baths {missing}")
        return dict(bath_betas)
    return {b.label: float(bath_betas) for b in model.baths}


def _extract_channel_dense(model: QuadraticModel, betas: dict, t: float) -> GaussianChannel:
    n = model.n_modes
    S = propagator(model)(t)
    sys_idx = [0, n]
    L = S[np.ix_(sys_idx, sys_idx)]
    seed = system_state(0.5 * HBAR * np.eye(2))
    start = bath_product_state(model, betas, seed)
    out = reduce_to_system(evolve(start, model, t))
    N = out.covariance - L @ seed.covariance @ L.T
    return GaussianChannel(L, 0.5 * (N + N.T), float(t))


def extract_channel(model: QuadraticModel, bath_betas, t, method: str = "auto"):
    """Channel of the reduced dynamics for a factorized start with thermal baths.

    ``bath_betas`` maps bath labels to inverse temperatures (a scalar applies
    to all baths). A scalar ``t`` returns one channel, an array a list.
    ``method`` is ``"dense"`` (propagate seeds through the full symplectic
    matrix), ``"modes"`` (normal-mode sums) or ``"auto"``.
    """
    betas = _bath_betas(model, bath_betas)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(times)):
        raise ValueError("times must be finite")
    if method == "auto":
        method = "dense" if model.n_modes <= 200 else "modes"
    if method == "dense":
        out = [_extract_channel_dense(model, betas, tt) for tt in times]
    elif method == "modes":
        out = StarPropagation(model).channels(times, betas)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[0] if np.ndim(t) == 0 else out


class StarPropagation:
    """Reduced system dynamics from the normal modes of a star-coupled model.

    In mass-weighted working coordinates the full propagator is
    E cos(W t) E^T, E sin(W t)/W E^T and -E W sin(W t) E^T, so the system
    row needs only the normal-mode frequencies and eigenvector rows.
    """

    def __init__(self, model: QuadraticModel):
        self.model = model
        spec = model.spectrum
        self.omega = np.sqrt(spec.eigenvalues)
        self.weights = spec.system_weights
        self._sqrt_m = np.sqrt(model.system.mass)

    @cached_property
    def eigenvectors(self) -> np.ndarray:
        return self.model.spectrum.eigenvectors()

    def _kernels(self, times):
        ph = np.outer(times, self.omega)
        c, s = np.cos(ph), np.sin(ph)
        return c, s

    def drift(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        a2 = self.weights**2
        m = self.model.system.mass
        L = np.empty((times.size, 2, 2))
        for sl in self._time_batches(times):
            c, s = self._kernels(times[sl])
            G = c @ a2
            L[sl, 0, 0] = G
            L[sl, 0, 1] = s @ (a2 / self.omega) / m
            L[sl, 1, 0] = -m * (s @ (a2 * self.omega))
            L[sl, 1, 1] = G
        return L

    def _time_batches(self, times):
        step = max(1, _TIME_BATCH_ELEMS // max(self.omega.size, 1))
        for start in range(0, times.size, step):
            yield slice(start, min(times.size, start + step))

    def _rows(self, times_batch, cols=None):
        """Working-coordinate system rows g, h, k at each time, over mode columns ``cols``."""
        E = self.eigenvectors if cols is None else self.eigenvectors[cols]
        c, s = self._kernels(times_batch)
        a = self.weights
        g = (c * a) @ E.T
        h = (s * (a / self.omega)) @ E.T
        k = (s * (a * self.omega)) @ E.T
        return g, h, k

    def _to_physical(self, xx, pp, xp) -> np.ndarray:
        m = self.model.system.mass
        C = np.empty((xx.size, 2, 2))
        C[:, 0, 0] = xx / m
        C[:, 1, 1] = pp * m
        C[:, 0, 1] = C[:, 1, 0] = xp
        return C

    @staticmethod
    def _diag_contrib(g, h, k, X, P):
        xx = (g**2) @ X + (h**2) @ P
        pp = (k**2) @ X + (g**2) @ P
        xp = -(g * k) @ X + (h * g) @ P
        return xx, pp, xp

    def bath_mode_variances(self, betas: dict):
        """Working <x^2>, <pi^2> of every bath mode in its own Gibbs state."""
        model = self.model
        w = model.mode_frequencies
        X = np.empty(w.size)
        P = np.empty(w.size)
        for b in model.baths:
            sl = model.bath_slice(b.label)
            sl0 = slice(sl.start - 1, sl.stop - 1)
            ct = coth_factor(w[sl0], betas[b.label])
            X[sl0] = 0.5 * HBAR * ct / w[sl0]
            P[sl0] = 0.5 * HBAR * ct * w[sl0]
        return X, P

    def noise(self, times, betas: dict) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        X, P = self.bath_mode_variances(betas)
        out = np.empty((times.size, 2, 2))
        bath_rows = np.arange(1, self.model.n_modes)
        for sl in self._time_batches(times):
            g, h, k = self._rows(times[sl], bath_rows)
            out[sl] = self._to_physical(*self._diag_contrib(g, h, k, X, P))
        return out

    def channels(self, times, betas: dict) -> list[GaussianChannel]:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        L = self.drift(times)
        N = self.noise(times, betas)
        return [GaussianChannel(L[i], 0.5 * (N[i] + N[i].T), float(t)) for i, t in enumerate(times)]

    def correlated_system_states(self, times, prepared: "QuadraticModel", beta_prepared: float,
                                 other_betas: dict) -> list[GaussianState]:
        """System states when the system and the baths of ``prepared`` start in
        their joint Gibbs state and every remaining bath is independently thermal.

        ``prepared`` must be this model restricted to its leading baths (same
        system, same leading mode lists).
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        n1 = prepared.n_modes
        labels1 = [b.label for b in prepared.baths]
        if [b.label for b in self.model.baths[: len(labels1)]] != labels1:
            raise ValueError("prepared model must be a leading sub-model of the propagated model")
        sub = prepared.spectrum
        E1 = sub.eigenvectors()
        X1, P1 = normal_mode_variances(sub, beta_prepared)
        X, P = self.bath_mode_variances({**{lab: np.inf for lab in labels1}, **other_betas})
        rest = np.arange(n1, self.model.n_modes)
        X, P = X[rest - 1], P[rest - 1]
        out = []
        for sl in self._time_batches(times):
            g, h, k = self._rows(times[sl])
            yg, yh, yk = g[:, :n1] @ E1, h[:, :n1] @ E1, k[:, :n1] @ E1
            xx1, pp1, xp1 = self._diag_contrib(yg, yh, yk, X1, P1)
            xx2, pp2, xp2 = self._diag_contrib(g[:, n1:], h[:, n1:], k[:, n1:], X, P)
            C = self._to_physical(xx1 + xx2, pp1 + pp2, xp1 + xp2)
            out.extend(system_state(0.5 * (c + c.T)) for c in C)
        return out

    def thermal_system_covariance(self, beta: float) -> np.ndarray:
        """System block of the model's own Gibbs state."""
        X, P = normal_mode_variances(self.model.spectrum, beta)
        a2 = self.weights**2
        m = self.model.system.mass
        return np.diag([(a2 @ X) / m, (a2 @ P) * m])
