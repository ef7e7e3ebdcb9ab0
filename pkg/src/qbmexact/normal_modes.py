"""Normal modes of a system oscillator coupled to independent oscillators.

In mass-weighted coordinates every model assembled here has a potential
Hessian of arrowhead form

    W = [[w00, w^T],
         [w,   diag(d)]],       w00 = omega0_sq + sum(w**2 / d)

(the counter-term makes the ``sum(w**2/d)`` piece exact). The eigenproblem
is solved in O(n^2) through the secular equation

    f(lam) = omega0_sq - lam - lam * sum_j (w_j**2 / d_j) / (d_j - lam) = 0,

written so the large counter-term never cancels against the couplings.
Each root is stored relative to its nearest pole, and the couplings are
recomputed from the converged roots (Gu & Eisenstat) so that the explicit
eigenvectors are orthonormal to working precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS = np.finfo(float).eps
_CHUNK_ELEMS = 2_000_000


def _chunks(n: int, width: int):
    step = max(1, _CHUNK_ELEMS // max(width, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


@dataclass(frozen=True)
class _Rotation:
    i: int
    j: int
    c: float
    s: float


@dataclass
class StarSpectrum:
    """Eigen-decomposition of an arrowhead Hessian.

    Attributes
    ----------
    eigenvalues : (n+1,) array
        Squared normal-mode frequencies, ascending.
    system_weights : (n+1,) array
        System component ``E[0, k]`` of each normalized eigenvector.
    """

    omega0_sq: float
    poles: np.ndarray
    couplings: np.ndarray
    eigenvalues: np.ndarray
    system_weights: np.ndarray
    # pole-relative representation of active roots
    _origin_pole: np.ndarray = field(repr=False)
    _origin: np.ndarray = field(repr=False)
    _offset: np.ndarray = field(repr=False)
    _active: np.ndarray = field(repr=False)  # sorted-bath indices still coupled
    _w_hat: np.ndarray = field(repr=False)
    _order: np.ndarray = field(repr=False)  # sorted position -> original bath index
    _rotations: list = field(repr=False, default_factory=list)
    _root_kind: np.ndarray = field(repr=False, default=None)  # -1 active, else deflated sorted index

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def eigenvectors(self, rows=None) -> np.ndarray:
        """Rows of the orthogonal eigenvector matrix.

        Row 0 is the system coordinate, row ``1 + j`` is bath mode ``j`` in
        the caller's original ordering. ``rows=None`` returns all rows.
        """
        n_bath = self.poles.size
        if rows is None:
            rows = np.arange(n_bath + 1)
        rows = np.asarray(rows, dtype=int)
        # work in sorted/rotated bath coordinates, then undo rotations
        needed_sorted = np.arange(n_bath)
        out_sorted = np.zeros((n_bath, self.size))
        active = self._active
        d_sorted = self.poles[self._order]
        cols_active = np.flatnonzero(self._root_kind < 0)
        if active.size:
            o = self._origin[cols_active]
            tau = self._offset[cols_active]
            for sl in _chunks(active.size, cols_active.size):
                dj = d_sorted[active[sl]]
                diff = (o[None, :] - dj[:, None]) + tau[None, :]
                out_sorted[active[sl][:, None], cols_active[None, :]] = (
                    self._w_hat[sl][:, None] * self.system_weights[cols_active][None, :] / diff
                )
        for k in np.flatnonzero(self._root_kind >= 0):
            out_sorted[self._root_kind[k], k] = 1.0
        for rot in reversed(self._rotations):
            ri = out_sorted[rot.i].copy()
            rj = out_sorted[rot.j].copy()
            # working y_i = c x_i - s x_j, y_j = s x_i + c x_j  =>  x = R^T y
            out_sorted[rot.i] = rot.c * ri + rot.s * rj
            out_sorted[rot.j] = -rot.s * ri + rot.c * rj
        full = np.empty((n_bath + 1, self.size))
        full[0] = self.system_weights
        full[1 + self._order[needed_sorted]] = out_sorted
        return full[rows]

    def dense_hessian(self) -> np.ndarray:
        n = self.poles.size
        W = np.zeros((n + 1, n + 1))
        W[0, 0] = self.omega0_sq + np.sum(self.couplings**2 / self.poles)
        W[0, 1:] = W[1:, 0] = self.couplings
        W[np.arange(1, n + 1), np.arange(1, n + 1)] = self.poles
        return W


def _solve_secular(omega0_sq, d, w, max_iter=200):
    """Roots of the secular equation for strictly increasing poles ``d``."""
    n = d.size
    kappa = w**2 / d
    n_roots = n + 1
    lam_upper = max(omega0_sq + kappa.sum(), d[-1]) + np.sqrt(np.sum(w**2)) + omega0_sq

    def f_at(lam):
        out = np.empty(lam.size)
        for sl in _chunks(lam.size, n):
            inv = 1.0 / (d[None, :] - lam[sl, None])
            out[sl] = omega0_sq - lam[sl] - lam[sl] * (inv @ kappa)
        return out

    # choose the half-interval containing each root and anchor on its pole
    lo_edge = np.concatenate([[0.0], d])
    hi_edge = np.concatenate([d, [lam_upper]])
    mid = 0.5 * (lo_edge + hi_edge)
    f_mid = f_at(mid)
    origin_pole = np.empty(n_roots, dtype=int)
    origin = np.empty(n_roots)
    lo = np.empty(n_roots)
    hi = np.empty(n_roots)
    right = f_mid > 0  # root lies in (mid, hi_edge)
    for k in range(n_roots):
        if right[k] and k < n:
            origin_pole[k] = k
            origin[k] = d[k]
            lo[k], hi[k] = mid[k] - d[k], 0.0
        elif not right[k] and k > 0:
            origin_pole[k] = k - 1
            origin[k] = d[k - 1]
            lo[k], hi[k] = 0.0, mid[k] - d[k - 1]
        elif k == 0:  # lower half of (0, d_0): anchor at zero, no pole there
            origin_pole[k] = -1
            origin[k] = 0.0
            lo[k], hi[k] = 0.0, mid[k]
        else:  # upper half of (d_last, lam_upper)
            origin_pole[k] = -1
            origin[k] = 0.0
            lo[k], hi[k] = mid[k], hi_edge[k]
    tau = 0.5 * (lo + hi)
    done = np.zeros(n_roots, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        for sl in _chunks(idx.size, n):
            k = idx[sl]
            t = tau[k]
            o = origin[k]
            p = origin_pole[k]
            delta = d[None, :] - o[:, None]
            denom = delta - t[:, None]
            has_pole = p >= 0
            rows = np.flatnonzero(has_pole)
            denom[rows, p[rows]] = np.inf
            inv = 1.0 / denom
            r0 = inv @ kappa
            r1 = (inv * inv) @ kappa
            lam = o + t
            base = omega0_sq - lam - lam * r0
            kp = np.where(has_pole, kappa[np.maximum(p, 0)], 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(has_pole, base + lam * kp / t, base)
                h = np.where(has_pole, t * base + lam * kp, base)
                dh = np.where(
                    has_pole,
                    base + t * (-1.0 - r0 - lam * r1) + kp,
                    -1.0 - r0 - lam * r1,
                )
            pos = f > 0
            lo_k = np.where(pos, t, lo[k])
            hi_k = np.where(pos, hi[k], t)
            zero = f == 0
            lo_k = np.where(zero, t, lo_k)
            hi_k = np.where(zero, t, hi_k)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = h / dh
                t_new = t - step
            bad = ~np.isfinite(t_new) | (t_new <= lo_k) | (t_new >= hi_k)
            t_new = np.where(bad, 0.5 * (lo_k + hi_k), t_new)
            scale = np.maximum(np.abs(t_new), np.abs(o) * _EPS)
            conv = (np.abs(t_new - t) <= 2 * _EPS * scale) | zero
            # bisection fallback cannot make progress below one ulp
            conv |= (hi_k - lo_k) <= 4 * _EPS * np.maximum(np.abs(lo_k) + np.abs(hi_k), np.abs(o) * _EPS)
            tau[k] = np.where(zero, t, t_new)
            lo[k] = lo_k
            hi[k] = hi_k
            done[k] = conv
    else:
        raise RuntimeError("secular equation did not converge")
    return origin_pole, origin, tau


def _gu_eisenstat(d, origin, tau, w_sign):
    """Couplings for which the computed roots are exact eigenvalues."""
    n = d.size
    log_w2 = np.zeros(n)
    lam_minus_d = lambda kk, jj: (origin[kk][None, :] - d[jj][:, None]) + tau[kk][None, :]
    for sl in _chunks(n, n + 1):
        j = np.arange(n)[sl]
        # pair root k (k < j) with pole k, root k (k >= j) with pole k+1;
        # the two leftover roots (0 and n) give the prefactor
        ks = np.arange(1, n)  # roots 1 .. n-1
        num = np.abs(lam_minus_d(ks, j))  # (rows j, cols roots)
        pole_idx = np.where(ks[None, :] <= j[:, None], ks[None, :] - 1, ks[None, :])
        # root k in (d_{k-1}, d_k) in 0-based poles; for k <= j pair with d_{k-1}
        den = np.abs(d[pole_idx] - d[j][:, None])
        with np.errstate(divide="ignore"):
            ratio = np.log(num) - np.log(den)
        log_w2[sl] = ratio.sum(axis=1)
        first = np.abs(lam_minus_d(np.array([0]), j))[:, 0]
        last = np.abs(lam_minus_d(np.array([n]), j))[:, 0]
        log_w2[sl] += np.log(first) + np.log(last)
    return w_sign * np.exp(0.5 * log_w2)


def star_spectrum(omega0_sq: float, poles, couplings) -> StarSpectrum:
    """Diagonalize the mass-weighted Hessian of a star-coupled oscillator set.

    Parameters
    ----------
    omega0_sq : float
        Bare system frequency squared (the Hessian's system entry minus the
        counter-term ``sum(couplings**2 / poles)``).
    poles : (n,) array
        Bath frequencies squared, positive, in any order.
    couplings : (n,) array
        Off-diagonal system-bath entries of the mass-weighted Hessian.
    """
    d0 = np.asarray(poles, dtype=float)
    w0 = np.asarray(couplings, dtype=float)
    if d0.shape != w0.shape or d0.ndim != 1:
        raise ValueError("poles and couplings must be 1-D arrays of equal length")
    if omega0_sq <= 0 or np.any(d0 <= 0) or not np.all(np.isfinite(d0)) or not np.all(np.isfinite(w0)):
        raise ValueError("star Hessian must have positive finite frequencies")
    n = d0.size
    order = np.argsort(d0, kind="stable")
    d = d0[order].copy()
    w = w0[order].copy()

    rotations: list[_Rotation] = []
    for j in range(n - 1):
        if d[j + 1] - d[j] <= 4 * _EPS * d[j + 1] and w[j] != 0.0:
            r = np.hypot(w[j], w[j + 1])
            c, s = w[j + 1] / r, w[j] / r
            rotations.append(_Rotation(j, j + 1, c, s))
            w[j], w[j + 1] = 0.0, r
            d[j] = d[j + 1]
    active = np.flatnonzero(np.abs(w) > 1e-150)
    deflated = np.flatnonzero(np.abs(w) <= 1e-150)

    da, wa = d[active], w[active]
    if active.size:
        origin_pole, origin, tau = _solve_secular(omega0_sq, da, wa)
        w_hat = _gu_eisenstat(da, origin, tau, np.sign(wa))
        lam = origin + tau
        weights = np.empty(lam.size)
        for sl in _chunks(lam.size, da.size):
            diff = (origin[sl][:, None] - da[None, :]) + tau[sl][:, None]
            weights[sl] = 1.0 / np.sqrt(1.0 + np.sum((w_hat[None, :] / diff) ** 2, axis=1))
    else:
        origin = np.array([omega0_sq])
        tau = np.zeros(1)
        lam = origin.copy()
        weights = np.ones(1)
        w_hat = np.zeros(0)

    all_lam = np.concatenate([lam, d[deflated]])
    all_weights = np.concatenate([weights, np.zeros(deflated.size)])
    kind = np.concatenate([-np.ones(lam.size, dtype=int), deflated])
    all_origin = np.concatenate([origin, d[deflated]])
    all_tau = np.concatenate([tau, np.zeros(deflated.size)])
    perm = np.argsort(all_lam, kind="stable")
    return StarSpectrum(
        omega0_sq=float(omega0_sq),
        poles=d0,
        couplings=w0,
        eigenvalues=all_lam[perm],
        system_weights=all_weights[perm],
        _origin_pole=None,
        _origin=all_origin[perm],
        _offset=all_tau[perm],
        _active=active,
        _w_hat=w_hat,
        _order=order,
        _rotations=rotations,
        _root_kind=kind[perm],
    )
