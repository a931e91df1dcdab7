"""Affine-invariant Riemannian geometry of the SPD manifold.

At ``x`` the metric is ``<v1, v2>_x = tr(x^{-1} v1 x^{-1} v2)``; the
exponential and logarithm maps are conjugations of the matrix ``Exp``/``Log``
by ``x^{1/2}``.  Positive definiteness is validated once per public call.
"""

import numpy as np

from .errors import InputError
from .spectral import as_spd, as_symmetric, sqrt_pair, sym_basis, sym_exp, sym_log


def _same_dim(*mats):
    m = mats[0].shape[0]
    for M in mats[1:]:
        if M.shape[0] != m:
            raise InputError(f"dimension mismatch: {m} vs {M.shape[0]}")


def _sym(A):
    return 0.5 * (A + A.T)


def metric_inner(x, v1, v2):
    """``tr(x^{-1} v1 x^{-1} v2)``."""
    x = as_spd(x, "x")
    v1 = as_symmetric(v1, "v1")
    v2 = as_symmetric(v2, "v2")
    _same_dim(x, v1, v2)
    a = np.linalg.solve(x, v1)
    b = np.linalg.solve(x, v2)
    return float(np.einsum("ij,ji->", a, b))


def metric_norm(x, v):
    return float(np.sqrt(max(metric_inner(x, v, v), 0.0)))


def exp_map(x, v):
    """Riemannian exponential ``x^{1/2} Exp(x^{-1/2} v x^{-1/2}) x^{1/2}``."""
    x = as_spd(x, "x")
    v = as_symmetric(v, "v")
    _same_dim(x, v)
    xh, xmh = sqrt_pair(x)
    return _sym(xh @ sym_exp(xmh @ v @ xmh) @ xh)


def log_map(x, p):
    """Riemannian logarithm ``x^{1/2} Log(x^{-1/2} p x^{-1/2}) x^{1/2}``."""
    x = as_spd(x, "x")
    p = as_spd(p, "p")
    _same_dim(x, p)
    xh, xmh = sqrt_pair(x)
    return _sym(xh @ sym_log(xmh @ p @ xmh) @ xh)


def distance(x, p):
    """Geodesic distance ``||Log(x^{-1/2} p x^{-1/2})||_F``."""
    x = as_spd(x, "x")
    p = as_spd(p, "p")
    _same_dim(x, p)
    _, xmh = sqrt_pair(x)
    # generalized eigenvalues of (p, x) are those of x^{-1/2} p x^{-1/2}
    w = np.linalg.eigvalsh(_sym(xmh @ p @ xmh))
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def geodesic(x, v, t):
    """Point at time ``t`` on the geodesic leaving ``x`` with velocity ``v``."""
    return exp_map(x, float(t) * np.asarray(v, dtype=float))


def geodesic_between(x, p, t):
    """Point at fraction ``t`` along the geodesic segment from ``x`` to ``p``."""
    return exp_map(x, float(t) * log_map(x, p))


def congruence(g, x):
    """``g x g^T``: the isometry of the affine-invariant metric induced by ``g``."""
    g = np.asarray(g, dtype=float)
    return _sym(g @ np.asarray(x, dtype=float) @ g.T)


def tangent_basis(x):
    """Metric-orthonormal basis of ``T_x``: ``x^{1/2} E_k x^{1/2}`` for the Frobenius basis ``E_k``."""
    x = as_spd(x, "x")
    xh, _ = sqrt_pair(x)
    return np.array([_sym(xh @ E @ xh) for E in sym_basis(x.shape[0])])
