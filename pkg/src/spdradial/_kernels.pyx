# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Same signatures and results as ``_purepy``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, exp, fabs, copysign, log1p

cnp.import_array()


def mgs_reorth(W, double rtol):
    cdef const double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], k = w.shape[1]
    U_arr = np.empty((n, k))
    cdef double[:, ::1] u = U_arr
    cdef double[::1] v = np.empty(n)
    cdef Py_ssize_t i, j, r, rep
    cdef double norm0, nv, dot
    for j in range(k):
        norm0 = 0.0
        for r in range(n):
            v[r] = w[r, j]
            norm0 += v[r] * v[r]
        norm0 = sqrt(norm0)
        if norm0 == 0.0:
            return U_arr, j
        for rep in range(2):
            for i in range(j):
                dot = 0.0
                for r in range(n):
                    dot += u[r, i] * v[r]
                for r in range(n):
                    v[r] -= dot * u[r, i]
        nv = 0.0
        for r in range(n):
            nv += v[r] * v[r]
        nv = sqrt(nv)
        if nv <= rtol * norm0:
            return U_arr, j
        for r in range(n):
            u[r, j] = v[r] / nv
    return U_arr, -1


def graded_log_svd(B0, logscale, double tol, int max_sweeps):
    C_arr = np.array(B0, dtype=np.float64, order="F", copy=True)
    s_arr = np.array(logscale, dtype=np.float64, copy=True)
    cdef double[::1, :] c = C_arr
    cdef double[::1] s = s_arr
    cdef Py_ssize_t n = c.shape[0], k = c.shape[1]
    cdef Py_ssize_t i, j, a, b, r
    cdef int sweep, sweeps = -1
    cdef bint rotated
    cdef double nj, g, rho, eta, t_over_rho, t, cs, sn, ca, cb, na, nb
    for j in range(k):
        nj = 0.0
        for r in range(n):
            nj += c[r, j] * c[r, j]
        nj = sqrt(nj)
        if nj == 0.0:
            return s_arr, C_arr, -2
        for r in range(n):
            c[r, j] /= nj
        s[j] += log(nj)

    for sweep in range(max_sweeps):
        rotated = False
        for i in range(k - 1):
            for j in range(i + 1, k):
                if s[i] >= s[j]:
                    a = i
                    b = j
                else:
                    a = j
                    b = i
                g = 0.0
                for r in range(n):
                    g += c[r, a] * c[r, b]
                if fabs(g) <= tol:
                    continue
                rotated = True
                rho = exp(s[b] - s[a])
                eta = (rho * rho - 1.0) / (2.0 * g)
                t_over_rho = copysign(1.0, eta) / (fabs(eta) + sqrt(rho * rho + eta * eta))
                t = rho * t_over_rho
                cs = 1.0 / sqrt(1.0 + t * t)
                sn = cs * t
                na = 0.0
                nb = 0.0
                for r in range(n):
                    ca = cs * c[r, a] - sn * rho * c[r, b]
                    cb = (cs * t_over_rho) * c[r, a] + cs * c[r, b]
                    c[r, a] = ca
                    c[r, b] = cb
                    na += ca * ca
                    nb += cb * cb
                na = sqrt(na)
                nb = sqrt(nb)
                if na == 0.0 or nb == 0.0:
                    return s_arr, C_arr, -2
                for r in range(n):
                    c[r, a] /= na
                    c[r, b] /= nb
                s[a] += log(na)
                s[b] += log(nb)
        if not rotated:
            sweeps = sweep + 1
            break
    order = np.argsort(-s_arr, kind="stable")
    return s_arr[order], np.ascontiguousarray(C_arr[:, order]), sweeps


cdef int _jacobi_eigh(double[:, ::1] a, double[:, ::1] q, double[::1] lam, Py_ssize_t m) noexcept nogil:
    """Cyclic Jacobi on the symmetric m x m matrix ``a`` (destroyed)."""
    cdef Py_ssize_t i, j, p, r
    cdef int sweep
    cdef double apq, theta, t, c, s, tau, app, aqq, akp, akq, qkp, qkq
    cdef bint rotated
    for i in range(m):
        for j in range(m):
            q[i, j] = 1.0 if i == j else 0.0
    for sweep in range(100):
        rotated = False
        for p in range(m - 1):
            for r in range(p + 1, m):
                apq = a[p, r]
                if fabs(apq) <= 1e-17 * sqrt(fabs(a[p, p] * a[r, r])):
                    a[p, r] = 0.0
                    a[r, p] = 0.0
                    continue
                rotated = True
                app = a[p, p]
                aqq = a[r, r]
                theta = (aqq - app) / (2.0 * apq)
                t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[r, r] = aqq + t * apq
                a[p, r] = 0.0
                a[r, p] = 0.0
                for i in range(m):
                    if i != p and i != r:
                        akp = a[i, p]
                        akq = a[i, r]
                        a[i, p] = akp - s * (akq + tau * akp)
                        a[p, i] = a[i, p]
                        a[i, r] = akq + s * (akp - tau * akq)
                        a[r, i] = a[i, r]
                for i in range(m):
                    qkp = q[i, p]
                    qkq = q[i, r]
                    q[i, p] = qkp - s * (qkq + tau * qkp)
                    q[i, r] = qkq + s * (qkp - tau * qkq)
        if not rotated:
            break
    for i in range(m):
        lam[i] = a[i, i]
    return 0


def quantile_terms(Xmh, Xiw, P, double beta, double snap):
    cdef const double[:, :, ::1] xmh = np.ascontiguousarray(Xmh, dtype=np.float64)
    cdef const double[:, :, ::1] xiw = np.ascontiguousarray(Xiw, dtype=np.float64)
    cdef const double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = xmh.shape[0], m = xmh.shape[1]
    dist_arr = np.empty(n)
    inner_arr = np.empty(n)
    Y_arr = np.empty((n, m, m))
    cdef double[::1] dist = dist_arr
    cdef double[::1] inner = inner_arr
    cdef double[:, :, ::1] Y = Y_arr
    cdef double[:, ::1] tmp = np.empty((m, m))
    cdef double[:, ::1] a = np.empty((m, m))
    cdef double[:, ::1] q = np.empty((m, m))
    cdef double[:, ::1] core = np.empty((m, m))
    cdef double[::1] lam = np.empty(m)
    cdef double[::1] ll = np.empty(m)
    cdef Py_ssize_t k, i, j, r
    cdef double acc, d, delta, coef, xq
    for k in range(n):
        # A = Xmh P Xmh
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for r in range(m):
                    acc += p[i, r] * xmh[k, r, j]
                tmp[i, j] = acc
        for i in range(m):
            for j in range(i, m):
                acc = 0.0
                for r in range(m):
                    acc += xmh[k, i, r] * tmp[r, j]
                a[i, j] = acc
        for i in range(m):
            for j in range(i):
                a[i, j] = a[j, i]
        _jacobi_eigh(a, q, lam, m)
        d = 0.0
        for i in range(m):
            ll[i] = log(lam[i])
            d += ll[i] * ll[i]
        d = sqrt(d)
        dist[k] = d
        # core = Q^T Xiw Q
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for r in range(m):
                    acc += xiw[k, i, r] * q[r, j]
                tmp[i, j] = acc
        acc = 0.0
        for i in range(m):
            for j in range(m):
                xq = 0.0
                for r in range(m):
                    xq += q[r, i] * tmp[r, j]
                core[i, j] = xq
            acc += core[i, i] * ll[i]
        inner[k] = acc
        for i in range(m):
            for j in range(m):
                delta = (lam[i] - lam[j]) / lam[j]
                if fabs(delta) < 1e-300:
                    coef = 1.0 / lam[j]
                else:
                    coef = log1p(delta) / (lam[j] * delta)
                core[i, j] = -beta * coef * core[i, j]
            if d >= snap:
                core[i, i] += ll[i] / lam[i] / d
        # Y = Q core Q^T
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for r in range(m):
                    acc += q[i, r] * core[r, j]
                tmp[i, j] = acc
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for r in range(m):
                    acc += tmp[i, r] * q[j, r]
                Y[k, i, j] = acc
    return dist_arr, inner_arr, Y_arr
