"""Radial fields and Busemann functions on the SPD manifold.

A point ``xi`` of the boundary at infinity is represented by a base point
``p`` and a unit tangent ``z`` at ``p`` (the initial velocity of the ray
``t -> exp_p(t z)``).  For any ``x`` the unit vector at ``x`` pointing
towards ``xi`` has the closed form

    xi_x = x^{1/2} U D U^T x^{1/2}

where ``V D V^T`` is an eigendecomposition of ``p^{-1/2} z p^{-1/2}`` with
``D`` descending and ``U`` is the Gram-Schmidt orthonormalization of the
columns of ``W = x^{-1/2} p^{1/2} V``.

The same quantity is also available as a limit along the ray
(:func:`radial_field_oracle`), evaluated in the log domain so that large
``t`` does not overflow; the two routes share nothing beyond the
eigendecomposition of the direction.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConvergenceError, DegeneracyError, InputError, RangeError
from .geometry import exp_map, metric_inner
from .spectral import (
    as_spd,
    as_symmetric,
    eig_sym,
    gram_schmidt,
    orthonormal_complement,
    sqrt_pair,
    sym_basis,
)

_EPS = np.finfo(float).eps
NORM_TOL = 1e-6
JACOBI_MAX_SWEEPS = 60


def _sym(A):
    return 0.5 * (A + A.T)


@dataclass(frozen=True, eq=False)
class BoundaryDirection:
    """A point of the boundary at infinity given by ``(base, dir)``.

    ``dir`` must have unit metric norm at ``base``; deviations up to
    ``1e-6`` are normalized away, larger ones raise :class:`InputError`.
    """

    base: np.ndarray
    dir: np.ndarray

    def __post_init__(self):
        p = as_spd(self.base, "base")
        z = as_symmetric(self.dir, "dir")
        if z.shape != p.shape:
            raise InputError(f"dir has shape {z.shape}, base has {p.shape}")
        norm = math.sqrt(max(metric_inner(p, z, z), 0.0))
        if abs(norm - 1.0) > NORM_TOL:
            raise InputError(f"dir must be a unit tangent at base (metric norm {norm:.6g})")
        z = z / norm
        p.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "base", p)
        object.__setattr__(self, "dir", z)

    @classmethod
    def from_tangent(cls, base, v):
        """Direction of the ray from ``base`` with initial velocity parallel to ``v``."""
        base = as_spd(base, "base")
        v = as_symmetric(v, "v")
        norm = math.sqrt(max(metric_inner(base, v, v), 0.0))
        if norm == 0.0:
            raise InputError("cannot build a direction from a zero tangent vector")
        return cls(base, v / norm)

    @property
    def dim(self):
        return self.base.shape[0]

    @functools.cached_property
    def _whitened(self):
        ph, pmh = sqrt_pair(self.base)
        dec = eig_sym(pmh @ self.dir @ pmh)
        return ph, dec.eigenvalues, dec.eigenvectors

    @property
    def spectrum(self):
        """Descending eigenvalues of ``p^{-1/2} z p^{-1/2}``."""
        return self._whitened[1].copy()

    def ray(self, t):
        """The ray point ``exp_p(t z)``."""
        return exp_map(self.base, float(t) * self.dir)

    def congruent(self, g):
        """Image of the direction under the isometry ``y -> g y g^T``."""
        g = np.asarray(g, dtype=float)
        return BoundaryDirection.from_tangent(_sym(g @ self.base @ g.T), _sym(g @ self.dir @ g.T))

    def __repr__(self):
        return f"BoundaryDirection(dim={self.dim})"


@dataclass(frozen=True)
class RadialFrame:
    """Intermediate quantities of the closed form at one point ``x``."""

    W: np.ndarray
    U: np.ndarray
    D: np.ndarray


@dataclass(frozen=True)
class PowerMean:
    """``[sum_i exp(t d_i) w_i w_i^T]^{1/t}`` at a finite ``t``."""

    t: float
    value: np.ndarray


def _check_basis(xi, basis):
    ph, D, V = xi._whitened
    if basis is None:
        return V
    V2 = np.asarray(basis, dtype=float)
    if V2.shape != V.shape:
        raise InputError(f"basis must have shape {V.shape}")
    pmh = np.linalg.inv(ph)
    M = pmh @ xi.dir @ pmh
    if np.max(np.abs(V2.T @ V2 - np.eye(len(D)))) > 1e-10:
        raise InputError("basis is not orthogonal")
    if np.max(np.abs(V2.T @ M @ V2 - np.diag(D))) > 1e-9:
        raise InputError("basis does not diagonalize p^{-1/2} z p^{-1/2} with descending eigenvalues")
    return V2


def radial_frame(xi, x, basis=None):
    """``(W, U, D)`` of the closed form at ``x``; ``basis`` overrides the eigenvector choice."""
    x = as_spd(x, "x")
    if x.shape != xi.base.shape:
        raise InputError(f"x has shape {x.shape}, direction lives in dimension {xi.dim}")
    V = _check_basis(xi, basis)
    ph, D, _ = xi._whitened
    _, xmh = sqrt_pair(x)
    W = xmh @ ph @ V
    U = gram_schmidt(W)
    return RadialFrame(W, U, D.copy())


def whitened_radial_field(xi, x, basis=None):
    """``x^{-1/2} xi_x x^{-1/2} = U D U^T``: the radial field in the frame at ``x``."""
    fr = radial_frame(xi, x, basis)
    return _sym((fr.U * fr.D) @ fr.U.T)


def radial_field(xi, x, basis=None):
    """Unit tangent at ``x`` pointing to the boundary point ``xi`` (closed form).

    ``basis`` optionally supplies an alternative eigenvector matrix for
    ``p^{-1/2} z p^{-1/2}``; the result does not depend on it.
    """
    x = as_spd(x, "x")
    xh, _ = sqrt_pair(x)
    return _sym(xh @ whitened_radial_field(xi, x, basis) @ xh)


def graded_log(B0, logscale):
    """``Log(B B^T)`` for ``B = B0 diag(exp(logscale))`` with unbounded scales.

    Returns ``(log_sv, left)``: log singular values of ``B`` (descending) and
    the left singular vectors, so ``Log(B B^T) = left diag(2 log_sv) left^T``
    on the column space.
    """
    B0 = np.asarray(B0, dtype=float)
    logscale = np.asarray(logscale, dtype=float)
    if not np.all(np.isfinite(logscale)):
        raise RangeError("log scales are not finite")
    tol = 4.0 * B0.shape[0] * _EPS
    log_sv, left, sweeps = _backend.graded_log_svd(B0, logscale, tol, JACOBI_MAX_SWEEPS)
    if sweeps == -2:
        raise DegeneracyError("graded SVD met a vanishing column")
    if sweeps == -1:
        raise ConvergenceError("graded one-sided Jacobi did not converge")
    return log_sv, left


def _ray_whitened_log(xi, x, t):
    """``(L, x^{1/2})`` with ``L = Log(x^{-1/2} gamma(t) x^{-1/2})``, ``gamma(t) = exp_p(t z)``."""
    t = float(t)
    if not (t > 0 and np.isfinite(t)):
        raise InputError("t must be a positive finite number")
    x = as_spd(x, "x")
    if x.shape != xi.base.shape:
        raise InputError(f"x has shape {x.shape}, direction lives in dimension {xi.dim}")
    ph, D, V = xi._whitened
    xh, xmh = sqrt_pair(x)
    # x^{-1/2} gamma(t) x^{-1/2} = B B^T with B = (x^{-1/2} p^{1/2} V) exp(t D / 2)
    log_sv, left = graded_log(xmh @ ph @ V, 0.5 * t * D)
    L = _sym((left * (2.0 * log_sv)) @ left.T)
    if not np.all(np.isfinite(L)):
        raise RangeError(f"ray point at t={t:g} is not representable; use a smaller t")
    return L, xh


def ray_log_map(xi, x, t):
    """``(log_x(gamma(t)), d(x, gamma(t)))`` for the ray of ``xi``, evaluated in log domain."""
    L, xh = _ray_whitened_log(xi, x, t)
    return _sym(xh @ L @ xh), float(np.linalg.norm(L))


def radial_field_oracle(xi, x, t):
    """``log_x(gamma(t)) / d(x, gamma(t))``: the finite-``t`` approximation of ``xi_x``."""
    L, xh = _ray_whitened_log(xi, x, t)
    n = np.linalg.norm(L)
    if n == 0.0:
        raise InputError("x lies on the ray at time t; the direction is undefined there")
    return _sym(xh @ (L / n) @ xh)


def _check_spectrum(d, W, square):
    d = np.asarray(d, dtype=float).ravel()
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] != d.size:
        raise InputError(f"W must have {d.size} columns, got shape {W.shape}")
    if square and W.shape[0] != W.shape[1]:
        raise InputError(f"W must be square, got shape {W.shape}")
    if W.shape[0] < W.shape[1]:
        raise InputError(f"W must have at least as many rows as columns, got {W.shape}")
    if np.any(np.diff(d) > 0):
        raise InputError("d must be sorted in descending order")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(W))):
        raise InputError("non-finite input")
    return d, W


def power_mean_finite(d, W, t):
    """``H(t) = [sum_i exp(t d_i) w_i w_i^T]^{1/t}``.

    Evaluated as ``exp(d_1) [sum_i exp(t (d_i - d_1)) w_i w_i^T]^{1/t}`` with
    the bracket never formed explicitly: its eigen-pairs come from a log-domain
    SVD of ``W diag(exp(t (d - d_1) / 2))``.  ``W`` may be tall with full
    column rank, in which case ``H(t)`` is singular.
    """
    d, W = _check_spectrum(d, W, square=False)
    t = float(t)
    if not (t > 0 and np.isfinite(t)):
        raise InputError("t must be a positive finite number")
    gram_schmidt(W)  # rank check
    log_sv, left = graded_log(W, 0.5 * t * (d - d[0]))
    H = math.exp(d[0]) * (left * np.exp(2.0 * log_sv / t)) @ left.T
    return PowerMean(t, _sym(H))


def power_mean_limit(d, W):
    """``lim_{t->inf} H(t) = U diag(exp(d)) U^T`` with ``U`` the Gram-Schmidt frame of ``W``."""
    d, W = _check_spectrum(d, W, square=True)
    U = gram_schmidt(W)
    return _sym((U * np.exp(d)) @ U.T)


def power_mean_limit_degenerate(d, W):
    """Limit of ``H(t)`` when the ``m`` columns of the ``m' x m`` matrix ``W`` need not span.

    ``U_2 diag(exp(d_1), ..., exp(d_m), 0, ..., 0) U_2^T`` where ``U_2``
    extends the Gram-Schmidt frame of ``W`` by an orthonormal basis of the
    complement of its span.
    """
    d, W = _check_spectrum(d, W, square=False)
    U1 = gram_schmidt(W)
    U2 = np.hstack([U1, orthonormal_complement(U1)])
    lam = np.concatenate([np.exp(d), np.zeros(W.shape[0] - W.shape[1])])
    return _sym((U2 * lam) @ U2.T)


def _richardson(samples, order):
    """Diagonal-limited Richardson table for estimates at t, 2t, 4t, ... with a 1/t expansion."""
    R = list(samples[-(order + 1):])
    for j in range(1, len(R)):
        f = 2.0**j
        R = [(f * R[i + 1] - R[i]) / (f - 1.0) for i in range(len(R) - 1)]
    return R[-1]


def busemann(xi, x, tol=1e-6, t_start=8.0, t_cap=4096.0, order=3):
    """Busemann function ``lim_t d(x, gamma(t)) - t`` of the ray of ``xi``.

    The ray is marched at ``t = t_start * 2^k`` up to ``t_cap``.  The samples
    have a ``1/t`` expansion, so each new sample is combined with its
    predecessors by Richardson extrapolation (up to ``order`` terms); the
    march stops once two successive extrapolated estimates differ by less
    than ``tol / 2``.  ``busemann(xi, xi.base) == 0``.
    """
    tol = float(tol)
    if not tol > 0:
        raise InputError("tol must be positive")
    samples = []
    estimates = []
    t = float(t_start)
    while t <= t_cap:
        L, _ = _ray_whitened_log(xi, x, t)
        samples.append(float(np.linalg.norm(L)) - t)
        estimates.append(_richardson(samples, min(order, len(samples) - 1)))
        if len(estimates) >= 2 and abs(estimates[-1] - estimates[-2]) < 0.5 * tol:
            return estimates[-1]
        t *= 2.0
    raise ConvergenceError(
        f"Busemann estimate did not settle to {tol:g} by t={t_cap:g}",
        estimates=estimates[-2:],
    )


@dataclass(frozen=True)
class FDJacobian:
    """Finite-difference derivative of ``x -> xi_x`` at ``base``.

    ``images[k]`` is the directional derivative along ``basis[k]`` (a
    metric-orthonormal basis of the tangent space); ``coords[j, k]`` is its
    ``j``-th coordinate in the same basis.
    """

    base: np.ndarray
    basis: np.ndarray
    images: np.ndarray
    coords: np.ndarray
    step: float

    def __call__(self, v):
        """Apply the linear map to a tangent vector ``v`` at ``base``."""
        v = as_symmetric(v, "v")
        c = np.array([metric_inner(self.base, v, B) for B in self.basis])
        return np.tensordot(c, self.images, axes=1)


def radial_jacobian_fd(xi, x, h=1e-4):
    """Central differences of ``radial_field(xi, .)`` at ``x`` with steps ``x +- h B_k``."""
    h = float(h)
    if not h > 0:
        raise InputError("step must be positive")
    x = as_spd(x, "x")
    xh, xmh = sqrt_pair(x)
    basis = np.array([_sym(xh @ E @ xh) for E in sym_basis(x.shape[0])])
    images = []
    for B in basis:
        fp = radial_field(xi, x + h * B)
        fm = radial_field(xi, x - h * B)
        images.append((fp - fm) / (2.0 * h))
    images = np.array(images)
    if not np.all(np.isfinite(images)):
        raise RangeError(f"non-finite finite-difference quotient at h={h:g}; the step is too small")
    # coordinates in the orthonormal basis: <A, B_j>_x = <x^{-1/2} A x^{-1/2}, E_j>_F
    white = xmh @ images @ xmh
    E = sym_basis(x.shape[0])
    coords = np.einsum("jab,kab->jk", E, white)
    return FDJacobian(x, basis, images, coords, h)
