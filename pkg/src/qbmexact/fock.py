"""Fock-basis density matrices and propagator tensors of Gaussian states and channels.

Everything is computed in scaled quadratures X = q sqrt(m w / hbar),
P = p / sqrt(m w hbar) of the bare oscillator, where the vacuum has
covariance I/2. Two independent routes give density-matrix elements:

* ``recursion``: coefficients of the Husimi generating function
  exp(v^T A v / 2 + b^T v + c) in v = (alpha*, alpha).
* ``quadrature``: Gauss-Hermite integration of the characteristic
  function against <n|D(-alpha)|m>.

Tensor entries always use the quadrature route: the integrand is a
polynomial times a Gaussian, so a fixed order is exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .gaussian_dynamics import GaussianChannel
from .quadratic_model import GaussianState, SystemOscillator
from .units import HBAR

log = logging.getLogger(__name__)

_NODE_CHUNK = 4096


@dataclass(frozen=True)
class FockBasis:
    n_max: int
    oscillator: SystemOscillator = field(default_factory=SystemOscillator)

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError("n_max must be an integer >= 2")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def energies(self) -> np.ndarray:
        return HBAR * self.oscillator.frequency * (np.arange(self.dim) + 0.5)

    def scale(self) -> np.ndarray:
        mw = self.oscillator.mass * self.oscillator.frequency
        return np.diag([np.sqrt(mw / HBAR), 1.0 / np.sqrt(mw * HBAR)])

    def resized(self, n_max: int) -> "FockBasis":
        return FockBasis(n_max, self.oscillator)


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    elements: np.ndarray

    @property
    def n_max(self) -> int:
        return self.elements.shape[0] - 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    @property
    def leakage(self) -> float:
        """Population missing from the truncated basis."""
        return 1.0 - self.trace

    def populations(self) -> np.ndarray:
        return np.diag(self.elements).real.copy()

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T)))

    def min_eigenvalue(self) -> float:
        H = 0.5 * (self.elements + self.elements.conj().T)
        return float(np.linalg.eigvalsh(H)[0])

    def truncated(self, n_max: int) -> "FockDensityMatrix":
        return FockDensityMatrix(self.elements[: n_max + 1, : n_max + 1].copy())

    def clipped(self, tol: float = 1e-8) -> "FockDensityMatrix":
        """Remove roundoff-level negative eigenvalues (logged); larger ones are an error."""
        H = 0.5 * (self.elements + self.elements.conj().T)
        w, V = np.linalg.eigh(H)
        if w[0] >= 0:
            return FockDensityMatrix(H)
        if w[0] < -tol:
            raise ValueError(f"density matrix has eigenvalue {w[0]:.3e} below -{tol:g}")
        log.warning("clipping negative eigenvalue %.3e of a density matrix", w[0])
        w = np.clip(w, 0.0, None)
        return FockDensityMatrix((V * w) @ V.conj().T)

    @classmethod
    def pure(cls, n: int, n_max: int) -> "FockDensityMatrix":
        rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        rho[n, n] = 1.0
        return cls(rho)


def _scaled_moments(state: GaussianState, basis: FockBasis):
    if state.n_modes != 1:
        raise ValueError("Fock conversion needs a single-mode (system) state")
    D = basis.scale()
    C = D @ state.covariance @ D
    mu = D @ state.mean
    return 0.5 * (C + C.T), mu


def _check_physical_scaled(C: np.ndarray, tol: float = 1e-10):
    if not np.allclose(C, C.T, atol=1e-12) or np.any(np.linalg.eigvalsh(C) <= 0):
        raise ValueError("covariance is not symmetric positive definite")
    if np.linalg.det(C) < 0.25 * (1.0 - tol):
        raise ValueError("covariance violates the uncertainty relation")


# --- route 1: generating-function recursion -------------------------------------------

_M = np.array([[1.0, 1.0], [1j, -1j]]) / np.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def _fock_recursion(C: np.ndarray, mu: np.ndarray, n_max: int) -> np.ndarray:
    Sigma = C + 0.5 * np.eye(2)
    Si = np.linalg.inv(Sigma)
    A = _X - _M.T @ Si @ _M
    b = _M.T @ Si @ mu
    c = -0.5 * mu @ Si @ mu - 0.5 * np.log(np.linalg.det(Sigma))
    d = n_max + 1
    R = np.zeros((d, d), dtype=complex)
    R[0, 0] = np.exp(c)
    sq = np.sqrt(np.arange(d + 1))
    for m in range(d):
        if m > 0:
            # raise m from row 0
            R[0, m] = (b[1] * R[0, m - 1] + (A[1, 1] * sq[m - 1] * R[0, m - 2] if m > 1 else 0.0)) / sq[m]
        for n in range(d - 1):
            val = b[0] * R[n, m]
            if n > 0:
                val += A[0, 0] * sq[n] * R[n - 1, m]
            if m > 0:
                val += A[0, 1] * sq[m] * R[n, m - 1]
            R[n + 1, m] = val / sq[n + 1]
    return R


# --- route 2: characteristic-function quadrature --------------------------------------

def _gh_nodes(order: int, Sigma: np.ndarray):
    """Tensor Gauss-Hermite nodes k and weights for int dk exp(-k^T Sigma k / 2) f(k)."""
    x, w = np.polynomial.hermite_e.hermegauss(order)
    s, Q = np.linalg.eigh(Sigma)
    u1, u2 = np.meshgrid(x, x, indexing="ij")
    U = np.stack([u1.ravel(), u2.ravel()])
    k = Q @ (U / np.sqrt(s)[:, None])
    weights = np.outer(w, w).ravel() / np.sqrt(np.prod(s))
    return k, weights


def _alpha_of_k(k: np.ndarray) -> np.ndarray:
    # k = sqrt(2) (Im alpha, -Re alpha)
    return (-k[1] + 1j * k[0]) / np.sqrt(2.0)


def displacement_polynomials(beta: np.ndarray, n_rows: int, n_cols: int | None = None) -> np.ndarray:
    """P[n, m, :] with <n|D(beta)|m> = exp(-|beta|^2/2) P[n, m].

    Built from normalized associated Laguerre recurrences
    l_k = sqrt(k!/(k+a)!) L_k^(a)(|beta|^2), which avoid the cancellation of
    the two-term ladder recursion at large |beta|.
    """
    n_cols = n_rows if n_cols is None else n_cols
    beta = np.asarray(beta, dtype=complex)
    x = np.abs(beta) ** 2
    P = np.zeros((n_rows + 1, n_cols + 1) + beta.shape, dtype=complex)
    top = max(n_rows, n_cols)
    for a in range(top + 1):
        # entries with |n - m| = a, smaller index k = 0 .. kmax
        kmax = min(n_cols, n_rows - a) if a <= n_rows else -1
        kmax_t = min(n_rows, n_cols - a) if a <= n_cols else -1
        kk = max(kmax, kmax_t)
        if kk < 0:
            continue
        ell = np.empty((kk + 1,) + x.shape)
        ell[0] = np.exp(-0.5 * float(np.sum(np.log(np.arange(1, a + 1)))))
        if kk >= 1:
            ell[1] = (1.0 + a - x) * ell[0] / np.sqrt(1.0 + a)
        for k in range(1, kk):
            ell[k + 1] = ((2 * k + 1 + a - x) * ell[k] - np.sqrt(k * (k + a)) * ell[k - 1]) / np.sqrt(
                (k + 1) * (k + 1 + a)
            )
        if kmax >= 0:
            pw = beta**a
            k = np.arange(kmax + 1)
            P[k + a, k] = pw * ell[: kmax + 1]
        if a > 0 and kmax_t >= 0:
            pw = (-np.conj(beta)) ** a
            k = np.arange(kmax_t + 1)
            P[k, k + a] = pw * ell[: kmax_t + 1]
    return P


def _fock_quadrature(C: np.ndarray, mu: np.ndarray, n_max: int, order: int) -> np.ndarray:
    Sigma = C + 0.5 * np.eye(2)
    k, w = _gh_nodes(order, Sigma)
    phase = np.exp(1j * (mu @ k))
    P = displacement_polynomials(-_alpha_of_k(k), n_max)
    return (P @ (w * phase)) / (2.0 * np.pi)


def gaussian_to_fock(state: GaussianState, basis: FockBasis, method: str = "recursion",
                     tol: float = 1e-9, max_order: int = 512) -> FockDensityMatrix:
    """Density matrix of a single-mode Gaussian state in the oscillator's Fock basis."""
    C, mu = _scaled_moments(state, basis)
    _check_physical_scaled(C)
    n = basis.n_max
    if method == "recursion":
        return FockDensityMatrix(_fock_recursion(C, mu, n))
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    order = n + 2
    prev = _fock_quadrature(C, mu, n, order)
    while True:
        order *= 2
        cur = _fock_quadrature(C, mu, n, order)
        if np.max(np.abs(cur - prev)) < tol:
            return FockDensityMatrix(cur)
        if order > max_order:
            raise RuntimeError(
                f"quadrature did not converge: change {np.max(np.abs(cur - prev)):.2e} at order {order}"
            )
        prev = cur


# --- propagator tensor ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PropagatorTensor:
    """J[n, m, nu, mu] = <n| Phi(|nu><mu|) |m>. Unrequested input pairs hold NaN."""

    entries: np.ndarray
    time: float
    quadrature_order: int
    order_change: float | None = None  # max change when the order is doubled

    @property
    def n_out(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def n_in(self) -> int:
        return self.entries.shape[2] - 1

    def computed(self) -> np.ndarray:
        return ~np.isnan(self.entries[0, 0])

    def trace_error(self) -> np.ndarray:
        """sum_n J[n, n, nu, mu] - delta_{nu mu} over computed input pairs."""
        tr = np.einsum("nnab->ab", self.entries)
        return tr - np.eye(self.n_in + 1)

    def hermiticity_error(self) -> float:
        J = self.entries
        d = J - np.conj(J.transpose(1, 0, 3, 2))
        return float(np.nanmax(np.abs(d)))

    @classmethod
    def identity(cls, n_max: int) -> "PropagatorTensor":
        d = n_max + 1
        J = np.einsum("ac,bd->abcd", np.eye(d), np.eye(d)).astype(complex)
        return cls(J, 0.0, 0)


def _tensor_quadrature(Lam, N, n_out, n_in, pairs, order):
    Sigma = 0.5 * (Lam @ Lam.T) + 0.5 * np.eye(2) + N
    k, w = _gh_nodes(order, 0.5 * (Sigma + Sigma.T))
    a_out = -_alpha_of_k(k)
    a_in = _alpha_of_k(Lam.T @ k)
    nu = np.array([p[0] for p in pairs])
    mu = np.array([p[1] for p in pairs])
    J = np.zeros(((n_out + 1) ** 2, len(pairs)), dtype=complex)
    for start in range(0, w.size, _NODE_CHUNK):
        sl = slice(start, start + _NODE_CHUNK)
        P_out = displacement_polynomials(a_out[sl], n_out).reshape((n_out + 1) ** 2, -1)
        # input characteristic function: <mu| D(alpha') |nu>
        P_in = displacement_polynomials(a_in[sl], n_in)[mu, nu]
        J += (P_out * w[sl]) @ P_in.T
    return J.reshape(n_out + 1, n_out + 1, len(pairs)) / (2.0 * np.pi)


def propagator_tensor(channel: GaussianChannel, basis: FockBasis, inputs=None,
                      n_out: int | None = None, order: int | None = None,
                      check_order: bool = False, cp_tol: float = 1e-9) -> PropagatorTensor:
    """Energy-basis tensor of a Gaussian channel.

    ``inputs`` restricts the computed (nu, mu) pairs; ``n_out`` allows an
    output truncation larger than ``basis.n_max`` to measure leakage. The
    default order is the smallest that integrates the polynomial integrand
    exactly; ``check_order`` recomputes at twice that order and records the
    change.
    """
    if not channel.is_completely_positive(cp_tol):
        raise ValueError("channel is not completely positive")
    D = basis.scale()
    Di = np.linalg.inv(D)
    Lam = D @ channel.drift @ Di
    N = D @ channel.noise @ D
    n_in = basis.n_max
    n_out = n_in if n_out is None else int(n_out)
    if inputs is None:
        pairs = [(a, b) for a in range(n_in + 1) for b in range(n_in + 1)]
    else:
        pairs = [(int(a), int(b)) for a, b in inputs]
        if any(not (0 <= a <= n_in and 0 <= b <= n_in) for a, b in pairs):
            raise ValueError("input pair outside the basis")
    exact = n_out + n_in + 1
    order = exact if order is None else int(order)
    vals = _tensor_quadrature(Lam, N, n_out, n_in, pairs, order)
    change = None
    if check_order:
        vals2 = _tensor_quadrature(Lam, N, n_out, n_in, pairs, 2 * order)
        change = float(np.max(np.abs(vals2 - vals)))
        vals = vals2
        order = 2 * order
    J = np.full((n_out + 1, n_out + 1, n_in + 1, n_in + 1), np.nan, dtype=complex)
    for i, (a, b) in enumerate(pairs):
        J[:, :, a, b] = vals[:, :, i]
    return PropagatorTensor(J, float(channel.time), order, change)


def _contract(rho0: FockDensityMatrix, tensor: PropagatorTensor, secular: bool) -> FockDensityMatrix:
    r = rho0.elements
    if r.shape != (tensor.n_in + 1,) * 2:
        raise ValueError("density matrix and tensor truncations differ")
    if secular:
        r = np.diag(np.diag(r))
    need = np.abs(r) > 0
    J = tensor.entries
    if np.any(need & ~tensor.computed()):
        raise ValueError("tensor lacks input pairs required by the initial density matrix")
    Jz = np.where(np.isnan(J), 0.0, J)
    return FockDensityMatrix(np.einsum("nmab,ab->nm", Jz, r))


def evolve_density_matrix(rho0: FockDensityMatrix, tensor: PropagatorTensor) -> FockDensityMatrix:
    return _contract(rho0, tensor, secular=False)


def secular_evolve(rho0: FockDensityMatrix, tensor: PropagatorTensor) -> FockDensityMatrix:
    """Contraction with all nu != mu input terms dropped."""
    return _contract(rho0, tensor, secular=True)


def thermal_populations(nbar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    return nbar**n / (1.0 + nbar) ** (n + 1)

