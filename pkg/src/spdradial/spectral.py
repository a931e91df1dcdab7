"""Symmetric eigendecomposition and the spectral matrix functions built on it.

Every matrix function here (``Exp``, ``Log``, real powers) is evaluated as
``V f(D) V^T`` from a symmetric eigendecomposition, so the principal real
branches are obtained exactly rather than through series.  Symmetric and SPD
matrices are represented by plain ``numpy`` arrays; :func:`as_symmetric` and
:func:`as_spd` validate and symmetrize them at API boundaries.
"""

from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import DegeneracyError, DomainError, InputError, RangeError

_EPS = np.finfo(float).eps
_LOG_MAX = np.log(np.finfo(float).max)

#: Eigenvalues at or below ``PSD_RTOL * max(1, largest)`` count as zero.
PSD_RTOL = 1e-12
#: Relative residual below which a Gram-Schmidt pivot is declared degenerate.
GS_RTOL = 1e-12


class SpectralDecomposition(NamedTuple):
    """Eigenvalues in descending order and the matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T

    def apply(self, func):
        """``V diag(func(d)) V^T``."""
        V = self.eigenvectors
        out = (V * func(self.eigenvalues)) @ V.T
        return 0.5 * (out + out.T)


def as_matrix(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InputError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


def as_symmetric(A, name="matrix", atol=None):
    """Validate a square finite matrix and return its exact symmetrization.

    With ``atol`` set, an asymmetry ``max|A - A^T|`` larger than
    ``atol * max(1, max|A|)`` raises :class:`InputError`.
    """
    A = as_matrix(A, name)
    if atol is not None:
        gap = np.max(np.abs(A - A.T))
        if gap > atol * max(1.0, np.max(np.abs(A))):
            raise InputError(f"{name} is not symmetric (max |A - A^T| = {gap:.3g})")
    return 0.5 * (A + A.T)


def pd_threshold(eigenvalues):
    """Smallest eigenvalue an SPD matrix may have: dimension-scaled relative to the largest."""
    m = len(eigenvalues)
    return m * _EPS * max(float(np.max(np.abs(eigenvalues))), np.finfo(float).tiny)


def as_spd(A, name="matrix", atol=None):
    """Symmetrize ``A`` and check strict positive definiteness."""
    A = as_symmetric(A, name, atol=atol)
    w = np.linalg.eigvalsh(A)
    if w[0] <= pd_threshold(w):
        raise DomainError(
            f"{name} is not positive definite (smallest eigenvalue {w[0]:.6g})",
            eigenvalue=float(w[0]),
        )
    return A


def eig_sym(A):
    """Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.

    >>> eig_sym(np.diag([1.0, 3.0])).eigenvalues
    array([3., 1.])
    """
    A = as_symmetric(A)
    w, V = np.linalg.eigh(A)
    # stable: tied eigenvalues keep the backend's order (identity columns for diagonal input)
    order = np.argsort(-w, kind="stable")
    return SpectralDecomposition(w[order], np.ascontiguousarray(V[:, order]))


def sym_exp(A):
    """Matrix exponential of a symmetric matrix (always SPD)."""
    dec = eig_sym(A)
    if dec.eigenvalues[0] > _LOG_MAX:
        raise RangeError(f"exp({dec.eigenvalues[0]:.6g}) overflows double precision")
    return dec.apply(np.exp)


def sym_log(A):
    """Principal matrix logarithm of an SPD matrix."""
    dec = eig_sym(A)
    d = dec.eigenvalues
    if d[-1] <= pd_threshold(d):
        raise DomainError(
            f"matrix logarithm needs positive eigenvalues; smallest is {d[-1]:.6g}",
            eigenvalue=float(d[-1]),
        )
    return dec.apply(np.log)


def sym_power(A, e):
    """``A**e`` for positive semidefinite ``A`` via its eigendecomposition.

    Eigenvalues within ``PSD_RTOL * max(1, largest)`` of zero are clamped to
    zero; anything more negative is a :class:`DomainError`, as is a negative
    exponent applied to a singular matrix.
    """
    e = float(e)
    if not np.isfinite(e):
        raise InputError("exponent must be finite")
    dec = eig_sym(A)
    d = dec.eigenvalues
    tol = PSD_RTOL * max(1.0, float(d[0]))
    if d[-1] < -tol:
        raise DomainError(f"matrix is not positive semidefinite (eigenvalue {d[-1]:.6g})", eigenvalue=float(d[-1]))
    d = np.where(d <= tol, 0.0, d)
    if e < 0 and d[-1] == 0.0:
        raise DomainError("negative power of a singular matrix", eigenvalue=float(dec.eigenvalues[-1]))
    with np.errstate(over="raise"):
        try:
            p = np.power(d, e)
        except FloatingPointError as exc:
            raise RangeError(f"eigenvalue power overflows ({exc})") from None
    V = dec.eigenvectors
    out = (V * p) @ V.T
    return 0.5 * (out + out.T)


def sqrt_pair(A):
    """``(A^{1/2}, A^{-1/2})`` from a single eigendecomposition of an SPD matrix."""
    dec = eig_sym(A)
    d = dec.eigenvalues
    if d[-1] <= pd_threshold(d):
        raise DomainError(f"matrix is not positive definite (smallest eigenvalue {d[-1]:.6g})", eigenvalue=float(d[-1]))
    r = np.sqrt(d)
    return dec.apply(lambda _: r), dec.apply(lambda _: 1.0 / r)


def gram_schmidt(W, rtol=GS_RTOL):
    """Orthonormalize the columns of ``W`` in order.

    Modified Gram-Schmidt with one reorthogonalization pass.  The result
    ``U`` satisfies ``span(U[:, :k]) == span(W[:, :k])`` for every ``k`` and
    ``U[:, k] @ W[:, k] > 0``.  ``W`` may be tall (``m' x k``, ``k <= m'``).

    Raises :class:`DegeneracyError` when a column's residual after projection
    is below ``rtol`` times its norm.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] > W.shape[0] or W.shape[1] < 1:
        raise InputError(f"gram_schmidt needs an n x k matrix with 1 <= k <= n, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise InputError("gram_schmidt input has non-finite entries")
    U, bad = _backend.mgs_reorth(W, rtol)
    if bad >= 0:
        raise DegeneracyError(f"column {bad} is numerically dependent on the preceding columns")
    return U


def orthonormal_complement(U):
    """Orthonormal basis (columns) of the orthogonal complement of ``span(U)``."""
    n, k = U.shape
    Q, _ = np.linalg.qr(np.hstack([U, np.eye(n)]), mode="complete")
    C = Q[:, k:n]
    # re-project to remove the trace of U left by rounding
    C = C - U @ (U.T @ C)
    return gram_schmidt(C) if C.shape[1] else C


def frobenius_inner(A, B):
    """``trace(A @ B)``; equals the entrywise sum of products for symmetric input."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise InputError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return float(np.einsum("ij,ji->", A, B))


def sym_basis(m):
    """Frobenius-orthonormal basis of the symmetric m x m matrices, shape ``(m(m+1)/2, m, m)``."""
    out = []
    for i in range(m):
        for j in range(i, m):
            E = np.zeros((m, m))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            out.append(E)
    return np.array(out)


def sym_to_vec(A):
    """Coordinates of a symmetric matrix in :func:`sym_basis` (an isometry onto R^{m(m+1)/2})."""
    m = A.shape[-1]
    iu = np.triu_indices(m)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return A[..., iu[0], iu[1]] * scale


def vec_to_sym(v, m):
    iu = np.triu_indices(m)
    scale = np.where(iu[0] == iu[1], 1.0, 1.0 / np.sqrt(2.0))
    A = np.zeros(v.shape[:-1] + (m, m))
    A[..., iu[0], iu[1]] = v * scale
    A[..., iu[1], iu[0]] = v * scale
    return A
