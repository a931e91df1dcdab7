"""Pure-Python/NumPy implementations of the hot kernels.

These mirror the compiled versions in ``_kernels.pyx`` argument for argument
and are used whenever the extension is unavailable (or when
``SPDRADIAL_PURE=1`` is set).  Inputs are assumed validated by the callers.
"""

import math

import numpy as np

_EPS = np.finfo(float).eps


def mgs_reorth(W, rtol):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Returns ``(U, bad)``: ``bad`` is the index of the first column whose
    residual fell below ``rtol`` times its original norm, or -1.
    """
    W = np.array(W, dtype=float, order="F")
    n, k = W.shape
    U = np.empty((n, k))
    for j in range(k):
        v = W[:, j].copy()
        norm0 = math.sqrt(float(v @ v))
        if norm0 == 0.0:
            return U, j
        for _ in range(2):
            for i in range(j):
                v -= (U[:, i] @ v) * U[:, i]
        nv = math.sqrt(float(v @ v))
        if nv <= rtol * norm0:
            return U, j
        U[:, j] = v / nv
    return U, -1


def graded_log_svd(B0, logscale, tol, max_sweeps):
    """SVD of ``B0 @ diag(exp(logscale))`` kept in log domain.

    One-sided Jacobi acting on columns stored as (unit vector, log scale).
    Rotation parameters only ever use the scale ratio ``exp(s_b - s_a) <= 1``
    so nothing overflows however large the scales are.

    Returns ``(log_sv, left, sweeps)`` sorted by descending singular value;
    ``sweeps`` is -1 if ``max_sweeps`` was exhausted and -2 if a column
    vanished.
    """
    C = np.array(B0, dtype=float)
    n, k = C.shape
    s = np.array(logscale, dtype=float)
    for j in range(k):
        nj = math.sqrt(float(C[:, j] @ C[:, j]))
        if nj == 0.0:
            return s, C, -2
        C[:, j] /= nj
        s[j] += math.log(nj)

    sweeps = -1
    for sweep in range(max_sweeps):
        rotated = False
        for i in range(k - 1):
            for j in range(i + 1, k):
                if s[i] >= s[j]:
                    a, b = i, j
                else:
                    a, b = j, i
                g = float(C[:, a] @ C[:, b])
                if abs(g) <= tol:
                    continue
                rotated = True
                rho = math.exp(s[b] - s[a])
                eta = (rho * rho - 1.0) / (2.0 * g)
                t_over_rho = math.copysign(1.0, eta) / (abs(eta) + math.sqrt(rho * rho + eta * eta))
                t = rho * t_over_rho
                cs = 1.0 / math.sqrt(1.0 + t * t)
                sn = cs * t
                ca = cs * C[:, a] - sn * rho * C[:, b]
                cb = (cs * t_over_rho) * C[:, a] + cs * C[:, b]
                na = math.sqrt(float(ca @ ca))
                nb = math.sqrt(float(cb @ cb))
                if na == 0.0 or nb == 0.0:
                    return s, C, -2
                C[:, a] = ca / na
                C[:, b] = cb / nb
                s[a] += math.log(na)
                s[b] += math.log(nb)
        if not rotated:
            sweeps = sweep + 1
            break
    order = np.argsort(-s, kind="stable")
    return s[order], C[:, order], sweeps


def _log_divided_differences(lam):
    """(log l_i - log l_j) / (l_i - l_j), with 1/l on the diagonal, batched."""
    li = lam[..., :, None]
    lj = lam[..., None, :]
    delta = (li - lj) / lj
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log1p(delta) / (lj * delta)
    same = np.abs(delta) < 1e-300
    return np.where(same, 1.0 / lj, out)


def quantile_terms(Xmh, Xiw, P, beta, snap):
    """Per-point terms of the radial-field quantile loss and its gradient.

    For each data point with inverse square root ``Xmh[i]`` and whitened
    radial field ``Xiw[i]`` this forms ``A = Xmh P Xmh`` and returns

    * ``dist[i] = ||Log A||_F``,
    * ``inner[i] = tr(Xiw Log A)``,
    * ``Y[i] = A^{-1} Log A / dist - beta * DLog_A[Xiw]``, the whitened
      Euclidean gradient of ``dist - beta * inner`` (the distance part is
      dropped when ``dist < snap``).
    """
    A = Xmh @ P @ Xmh
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    lam, Q = np.linalg.eigh(A)
    loglam = np.log(lam)
    dist = np.sqrt(np.sum(loglam**2, axis=-1))
    Qt = np.swapaxes(Q, -1, -2)
    Xi_q = Qt @ Xiw @ Q
    inner = np.einsum("...ii,...i->...", Xi_q, loglam)
    safe = np.where(dist < snap, 1.0, dist)
    coef = np.where((dist < snap)[..., None], 0.0, loglam / lam / safe[..., None])
    inner_coef = _log_divided_differences(lam) * Xi_q
    core = -beta * inner_coef
    idx = np.arange(lam.shape[-1])
    core[..., idx, idx] += coef
    Y = Q @ core @ Qt
    return dist, inner, Y
