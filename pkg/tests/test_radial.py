import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdradial.errors import ConvergenceError, DegeneracyError, InputError, RangeError
from spdradial.geometry import congruence, distance, exp_map, metric_inner, metric_norm
from spdradial.radial import (
    BoundaryDirection,
    busemann,
    graded_log,
    power_mean_finite,
    power_mean_limit,
    power_mean_limit_degenerate,
    radial_field,
    radial_field_oracle,
    radial_frame,
    radial_jacobian_fd,
    ray_log_map,
    whitened_radial_field,
)
from spdradial.spectral import gram_schmidt, sqrt_pair, sym_basis

from conftest import random_direction, random_spd, random_sym


def richardson_oracle(xi, x, t0=400.0):
    """Second-order extrapolation of the finite-t oracle (its error has a 1/t expansion)."""
    f1, f2, f4 = (radial_field_oracle(xi, x, t0 * k) for k in (1, 2, 4))
    return (8 * f4 - 6 * f2 + f1) / 3


def conditioned_matrix(rng, m, lo=0.5, hi=2.0):
    Q1 = np.linalg.qr(rng.normal(size=(m, m)))[0]
    Q2 = np.linalg.qr(rng.normal(size=(m, m)))[0]
    return Q1 @ np.diag(rng.uniform(lo, hi, size=m)) @ Q2


def spaced_spectrum(rng, m, gap=0.1):
    while True:
        d = np.sort(rng.normal(size=m))[::-1]
        if np.all(-np.diff(d) >= gap):
            return d


class TestBoundaryDirection:
    def test_normalizes_small_deviation(self):
        xi = BoundaryDirection(np.eye(2), np.diag([1.0 + 1e-7, 0.0]))
        assert metric_norm(xi.base, xi.dir) == pytest.approx(1.0, abs=1e-15)

    def test_rejects_non_unit(self):
        with pytest.raises(InputError):
            BoundaryDirection(np.eye(2), np.diag([2.0, 0.0]))

    def test_rejects_zero_tangent(self):
        with pytest.raises(InputError):
            BoundaryDirection.from_tangent(np.eye(2), np.zeros((2, 2)))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(InputError):
            BoundaryDirection(np.eye(2), np.eye(3) / math.sqrt(3))

    def test_immutable(self, rng):
        xi = random_direction(rng, 3)
        with pytest.raises(ValueError):
            xi.base[0, 0] = 5.0

    def test_spectrum_and_ray(self, rng):
        xi = random_direction(rng, 3)
        d = xi.spectrum
        assert np.all(np.diff(d) <= 0)
        assert np.sum(d**2) == pytest.approx(1.0, abs=1e-12)
        assert distance(xi.base, xi.ray(2.0)) == pytest.approx(2.0, abs=1e-10)


class TestRadialField:
    def test_at_base_point(self, rng):
        for m in range(1, 6):
            xi = random_direction(rng, m)
            np.testing.assert_allclose(radial_field(xi, xi.base), xi.dir, atol=1e-10)

    def test_scalar(self):
        xi = BoundaryDirection(np.eye(1), np.eye(1))
        for x in (0.01, 1.0, 4.0, 300.0):
            assert radial_field(xi, [[x]])[0, 0] == pytest.approx(x, rel=1e-14)

    def test_diagonal(self):
        d1, d2 = 0.8, -0.6
        xi = BoundaryDirection(np.eye(2), np.diag([d1, d2]))
        x = np.diag([3.0, 0.25])
        np.testing.assert_allclose(radial_field(xi, x), np.diag([d1 * 3.0, d2 * 0.25]), atol=1e-14)
        np.testing.assert_allclose(richardson_oracle(xi, x), radial_field(xi, x), atol=1e-6)

    def test_diagonal_oracle_at_200(self):
        xi = BoundaryDirection(np.eye(2), np.diag([0.8, -0.6]))
        x = np.diag([1.1, 0.95])
        assert np.linalg.norm(radial_field(xi, x) - radial_field_oracle(xi, x, 200.0)) <= 1e-3

    def test_matches_extrapolated_oracle(self, rng):
        for _ in range(40):
            m = int(rng.integers(2, 5))
            xi, x = random_direction(rng, m), random_spd(rng, m)
            err = np.linalg.norm(radial_field(xi, x) - richardson_oracle(xi, x))
            assert err <= 1e-4 * (1 + np.linalg.norm(x))

    @pytest.mark.xfail(strict=True, reason="oracle error at t=200 is c/t with c = O(|x|); see O(1/t) tests")
    def test_random_p3_oracle_200_literal(self, rng):
        for _ in range(20):
            xi, x = random_direction(rng, 3), random_spd(rng, 3)
            assert np.linalg.norm(radial_field(xi, x) - radial_field_oracle(xi, x, 200.0)) <= 1e-3

    def test_oracle_error_is_first_order(self, rng):
        for _ in range(40):
            xi, x = random_direction(rng, 3), random_spd(rng, 3)
            f = radial_field(xi, x)
            e50 = np.linalg.norm(f - radial_field_oracle(xi, x, 50.0))
            e200 = np.linalg.norm(f - radial_field_oracle(xi, x, 200.0))
            assert 3.0 <= e50 / e200 <= 5.0

    def test_oracle_error_decreasing(self, rng):
        for _ in range(40):
            xi, x = random_direction(rng, 3), random_spd(rng, 3)
            f = radial_field(xi, x)
            errs = [np.linalg.norm(f - radial_field_oracle(xi, x, t)) for t in (25.0, 50.0, 100.0, 200.0)]
            assert all(a > b for a, b in zip(errs, errs[1:]))

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_unit_norm(self, m, seed):
        rng = np.random.default_rng(seed)
        xi = random_direction(rng, m, cond=1e3)
        x = random_spd(rng, m, cond=1e3)
        v = radial_field(xi, x)
        assert metric_inner(x, v, v) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("s", [0.5, 2.0, 10.0])
    def test_base_point_shift(self, rng, s):
        for _ in range(20):
            xi, x = random_direction(rng, 3), random_spd(rng, 3)
            q = xi.ray(s)
            xi2 = BoundaryDirection(q, radial_field(xi, q))
            assert np.linalg.norm(radial_field(xi2, x) - radial_field(xi, x)) <= 1e-7

    def test_isometry_equivariance(self, rng):
        for _ in range(30):
            m = int(rng.integers(1, 5))
            xi, x = random_direction(rng, m), random_spd(rng, m)
            g = rng.normal(size=(m, m)) + 2.0 * np.eye(m)
            lhs = radial_field(xi.congruent(g), congruence(g, x))
            assert np.linalg.norm(lhs - g @ radial_field(xi, x) @ g.T) <= 1e-7

    def test_degeneracy_invariance(self, rng):
        # p^{-1/2} z p^{-1/2} with a repeated eigenvalue: any rotation inside the eigenspace
        for _ in range(20):
            Q = np.linalg.qr(rng.normal(size=(4, 4)))[0]
            D = np.array([0.6, 0.3, 0.3, -0.5])
            D /= np.linalg.norm(D)
            p = random_spd(rng, 4)
            ph, _ = sqrt_pair(p)
            xi = BoundaryDirection(p, ph @ (Q * D) @ Q.T @ ph)
            c, s = math.cos(0.7), math.sin(0.7)
            R = np.eye(4)
            R[1:3, 1:3] = [[c, -s], [s, c]]
            V2 = (Q @ R) * np.array([1.0, -1.0, 1.0, -1.0])
            x = random_spd(rng, 4)
            assert np.linalg.norm(radial_field(xi, x, basis=V2) - radial_field(xi, x)) <= 1e-8

    def test_sign_invariance(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        V = xi._whitened[2] * np.array([-1.0, 1.0, -1.0])
        np.testing.assert_allclose(radial_field(xi, x, basis=V), radial_field(xi, x), atol=1e-12)

    def test_bad_basis(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        with pytest.raises(InputError):
            radial_field(xi, x, basis=np.eye(3))

    def test_frame(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        fr = radial_frame(xi, x)
        np.testing.assert_allclose(fr.U, gram_schmidt(fr.W), atol=0)
        assert np.all(np.diff(fr.D) <= 0)
        xh, xmh = sqrt_pair(x)
        np.testing.assert_allclose(xmh @ radial_field(xi, x) @ xmh, whitened_radial_field(xi, x), atol=1e-12)

    def test_far_apart_points(self, rng):
        xi = random_direction(rng, 3, cond=1e3)
        x = congruence(np.diag([1e3, 1.0, 1e-3]), random_spd(rng, 3))
        v = radial_field(xi, x)
        assert metric_inner(x, v, v) == pytest.approx(1.0, abs=1e-9)


class TestOracle:
    def test_at_base_point(self, rng):
        xi = random_direction(rng, 3)
        for t in (0.5, 3.0, 200.0):
            np.testing.assert_allclose(radial_field_oracle(xi, xi.base, t), xi.dir, atol=1e-10)

    def test_scalar(self):
        xi = BoundaryDirection(np.eye(1), np.eye(1))
        assert radial_field_oracle(xi, [[4.0]], 100.0)[0, 0] == pytest.approx(4.0, abs=1e-6)

    def test_unit_norm(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        v = radial_field_oracle(xi, x, 37.0)
        assert metric_inner(x, v, v) == pytest.approx(1.0, abs=1e-12)

    def test_matches_dense_evaluation(self, rng):
        from spdradial.geometry import log_map

        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        g = xi.ray(5.0)
        ref = log_map(x, g) / distance(x, g)
        np.testing.assert_allclose(radial_field_oracle(xi, x, 5.0), ref, atol=1e-10)

    def test_huge_t_does_not_overflow(self, rng):
        # dense exp_p(t z) overflows near t d_1 ~ 709; the log-domain path does not
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        with pytest.raises(RangeError):
            xi.ray(5000.0)
        np.testing.assert_allclose(radial_field_oracle(xi, x, 1e7), radial_field(xi, x), atol=1e-5)

    def test_ray_log_map(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        L, d = ray_log_map(xi, x, 4.0)
        assert d == pytest.approx(distance(x, xi.ray(4.0)), rel=1e-10)
        assert metric_norm(x, L) == pytest.approx(d, rel=1e-10)

    @pytest.mark.parametrize("t", [0.0, -1.0, math.inf, math.nan])
    def test_bad_t(self, rng, t):
        with pytest.raises(InputError):
            radial_field_oracle(random_direction(rng, 2), np.eye(2), t)


class TestGradedLog:
    @pytest.mark.parametrize("scale", [1.0, 40.0, 150.0])
    def test_against_mpmath(self, rng, backend, scale):
        m = 3
        B0 = rng.normal(size=(m, m))
        s = np.sort(rng.normal(size=m))[::-1] * scale
        log_sv, left, sweeps = backend.graded_log_svd(B0, s, 4 * m * np.finfo(float).eps, 60)
        assert sweeps >= 0
        # B B^T spans exp(2 ptp(s)) in magnitude: carry enough digits for the smallest eigenvalue
        with mpmath.workdps(int(2 * np.ptp(s) / math.log(10)) + 60):
            B = mpmath.matrix(B0.tolist()) * mpmath.diag([mpmath.exp(float(v)) for v in s])
            ev, _ = mpmath.eigsy(B * B.T)
            ref = sorted((float(mpmath.log(e) / 2) for e in ev), reverse=True)
        np.testing.assert_allclose(log_sv, ref, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(left.T @ left, np.eye(m), atol=1e-13)

    def test_reconstructs_moderate_scales(self, rng):
        B0 = rng.normal(size=(4, 4))
        s = rng.normal(size=4)
        log_sv, left = graded_log(B0, s)
        B = B0 * np.exp(s)
        np.testing.assert_allclose((left * np.exp(2 * log_sv)) @ left.T, B @ B.T, atol=1e-12)

    def test_non_finite_scale(self):
        with pytest.raises(RangeError):
            graded_log(np.eye(2), [np.inf, 0.0])

    def test_vanishing_column(self):
        with pytest.raises(DegeneracyError):
            graded_log(np.array([[1.0, 0.0], [0.0, 0.0]]), [0.0, 0.0])


class TestPowerMean:
    def test_identity_frame(self, rng):
        d = np.sort(rng.normal(size=3))[::-1]
        for t in (0.5, 7.0, 300.0):
            np.testing.assert_allclose(power_mean_finite(d, np.eye(3), t).value, np.diag(np.exp(d)), rtol=1e-12, atol=1e-14)

    def test_equal_spectrum(self, rng):
        W = rng.normal(size=(3, 3))
        c, t = 0.4, 3.0
        w, Q = np.linalg.eigh(W @ W.T)
        ref = math.exp(c) * (Q * w ** (1 / t)) @ Q.T
        np.testing.assert_allclose(power_mean_finite(np.full(3, c), W, t).value, ref, rtol=1e-11)

    def test_matches_direct_formula(self, rng):
        d = np.sort(rng.normal(size=3))[::-1]
        W = rng.normal(size=(3, 3))
        t = 4.0
        S = (W * np.exp(t * d)) @ W.T
        w, Q = np.linalg.eigh(S)
        np.testing.assert_allclose(power_mean_finite(d, W, t).value, (Q * w ** (1 / t)) @ Q.T, rtol=1e-10)

    def test_no_overflow(self, rng):
        d = np.array([3.0, 1.0, -2.0])
        H = power_mean_finite(d, rng.normal(size=(3, 3)), 1e4).value
        assert np.all(np.isfinite(H))

    def test_eigenvalues_at_100(self, rng):
        # well-conditioned W: relative eigenvalue error |r_jj|^{2/t} - 1 stays below 5e-2
        for _ in range(30):
            m = int(rng.integers(2, 5))
            d, W = np.sort(rng.normal(size=m))[::-1], conditioned_matrix(rng, m)
            ev = np.sort(np.linalg.eigvalsh(power_mean_finite(d, W, 100.0).value))[::-1]
            assert np.max(np.abs(ev / np.exp(d) - 1)) <= 5e-2

    def test_eigenvalue_first_order_term(self, rng):
        # alpha_j(H(t)) = e^{d_j} |r_jj|^{2/t} up to exp(-t gap) with W = QR
        for _ in range(30):
            m = int(rng.integers(2, 5))
            d, W = spaced_spectrum(rng, m, 0.2), rng.normal(size=(m, m))
            r = np.abs(np.diag(np.linalg.qr(W)[1]))
            ev = np.sort(np.linalg.eigvalsh(power_mean_finite(d, W, 200.0).value))[::-1]
            np.testing.assert_allclose(ev, np.exp(d) * r ** (2 / 200.0), rtol=1e-10)

    def test_power_mean_eigen_convergence(self, rng):
        for _ in range(30):
            m = int(rng.integers(2, 5))
            d, W = spaced_spectrum(rng, m), rng.normal(size=(m, m))
            U = gram_schmidt(W)
            H50, H200 = (power_mean_finite(d, W, t).value for t in (50.0, 200.0))
            rel = [np.max(np.abs(np.sort(np.linalg.eigvalsh(H))[::-1] / np.exp(d) - 1)) for H in (H50, H200)]
            assert rel[1] < rel[0]
            for j in range(m):
                r50 = np.linalg.norm(H50 @ U[:, j] - math.exp(d[j]) * U[:, j])
                r200 = np.linalg.norm(H200 @ U[:, j] - math.exp(d[j]) * U[:, j])
                assert r200 < r50

    def test_limit_examples(self, rng):
        d = np.array([1.0, 0.0, -1.0])
        np.testing.assert_allclose(power_mean_limit(d, np.eye(3)), np.diag(np.exp(d)), rtol=1e-15)
        np.testing.assert_allclose(power_mean_limit(np.full(3, 0.3), rng.normal(size=(3, 3))), math.exp(0.3) * np.eye(3), atol=1e-13)

    def test_limit_vs_finite(self, rng):
        for _ in range(30):
            m = int(rng.integers(2, 5))
            d, W = np.sort(rng.normal(size=m))[::-1], conditioned_matrix(rng, m)
            L = power_mean_limit(d, W)
            assert np.linalg.norm(L - power_mean_finite(d, W, 200.0).value) <= 1e-2 * np.linalg.norm(L)
            assert np.linalg.eigvalsh(L)[0] > 0

    def test_input_validation(self, rng):
        with pytest.raises(InputError):
            power_mean_finite([0.0, 1.0], np.eye(2), 1.0)
        with pytest.raises(InputError):
            power_mean_limit([1.0, 0.0], np.ones((3, 2)))
        with pytest.raises(DegeneracyError):
            power_mean_limit([1.0, 0.0], np.ones((2, 2)))
        with pytest.raises(DegeneracyError):
            power_mean_finite([1.0, 0.0], np.ones((2, 2)), 5.0)


class TestPowerMeanDegenerate:
    def test_rank_one(self):
        np.testing.assert_allclose(power_mean_limit_degenerate([0.0], [[1.0], [0.0]]), np.diag([1.0, 0.0]), atol=1e-15)

    def test_square_case(self, rng):
        d, W = np.sort(rng.normal(size=3))[::-1], rng.normal(size=(3, 3))
        np.testing.assert_allclose(power_mean_limit_degenerate(d, W), power_mean_limit(d, W), atol=1e-13)

    @pytest.mark.parametrize("m, mp", [(2, 3), (3, 5)])
    def test_vs_finite(self, rng, m, mp):
        for _ in range(20):
            d, W = np.sort(rng.normal(size=m))[::-1], conditioned_matrix(rng, mp)[:, :m]
            L = power_mean_limit_degenerate(d, W)
            assert np.linalg.norm(L - power_mean_finite(d, W, 200.0).value) <= 1e-2 * np.linalg.norm(L)
            ev = np.sort(np.linalg.eigvalsh(L))[::-1]
            assert np.all(ev[m:] <= 1e-8 * ev[0])
            assert ev[m - 1] > 1e-8 * ev[0]


class TestBusemann:
    def test_along_ray(self, rng):
        xi = random_direction(rng, 3)
        assert busemann(xi, xi.ray(3.0), tol=1e-8) == pytest.approx(-3.0, abs=1e-8)

    def test_base_point(self, rng):
        xi = random_direction(rng, 3)
        assert busemann(xi, xi.base) == pytest.approx(0.0, abs=1e-6)

    def test_scalar(self):
        xi = BoundaryDirection(np.eye(1), np.eye(1))
        for x in (0.2, 1.0, 7.0):
            assert busemann(xi, [[x]], tol=1e-8) == pytest.approx(-math.log(x), abs=1e-8)

    def test_shift_along_ray(self, rng):
        # b_{xi'} = b_xi + s when the base point moves to gamma(s)
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        q = xi.ray(2.0)
        xi2 = BoundaryDirection(q, radial_field(xi, q))
        assert busemann(xi2, x, 1e-8) == pytest.approx(busemann(xi, x, 1e-8) + 2.0, abs=1e-6)

    def test_gradient_is_minus_radial_field(self, rng):
        for _ in range(10):
            xi, x = random_direction(rng, 3), random_spd(rng, 3)
            h = 1e-3
            xh, _ = sqrt_pair(x)
            grad = np.zeros((3, 3))
            for E in sym_basis(3):
                B = xh @ E @ xh
                fp = busemann(xi, exp_map(x, h * B), 1e-9)
                fm = busemann(xi, exp_map(x, -h * B), 1e-9)
                grad += (fp - fm) / (2 * h) * B
            assert np.linalg.norm(grad + radial_field(xi, x)) <= 1e-4 * np.linalg.norm(x)

    def test_convergence_error(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3, cond=1e3)
        with pytest.raises(ConvergenceError) as info:
            busemann(xi, x, tol=1e-15, t_cap=32.0)
        assert len(info.value.estimates) == 2

    def test_bad_tol(self, rng):
        with pytest.raises(InputError):
            busemann(random_direction(rng, 2), np.eye(2), tol=0.0)


class TestJacobian:
    def test_scalar(self):
        xi = BoundaryDirection(np.eye(1), np.eye(1))
        J = radial_jacobian_fd(xi, [[2.5]], 1e-4)
        assert J(np.eye(1))[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_stable_at_base(self, rng):
        xi = random_direction(rng, 2)
        Js = [radial_jacobian_fd(xi, xi.base, h).coords for h in (1e-3, 1e-4, 1e-5)]
        for J in Js:
            assert np.all(np.isfinite(J))
        assert np.max(np.abs(Js[0] - Js[1])) <= 1e-5
        assert np.max(np.abs(Js[1] - Js[2])) <= 1e-5

    def test_linear_map(self, rng):
        xi, x = random_direction(rng, 3), random_spd(rng, 3)
        J = radial_jacobian_fd(xi, x, 1e-4)
        v, w = random_sym(rng, 3), random_sym(rng, 3)
        np.testing.assert_allclose(J(2 * v - w), 2 * J(v) - J(w), atol=1e-12)
        fd = (radial_field(xi, x + 1e-5 * v) - radial_field(xi, x - 1e-5 * v)) / 2e-5
        np.testing.assert_allclose(J(v), fd, atol=1e-5 * (1 + np.linalg.norm(fd)))

    def test_second_order_step_halving(self, rng):
        for _ in range(20):
            xi, x = random_direction(rng, 3), random_spd(rng, 3)
            J1, J2, J4 = (radial_jacobian_fd(xi, x, h).images for h in (4e-3, 2e-3, 1e-3))
            ratio = np.linalg.norm(J1 - J2) / np.linalg.norm(J2 - J4)
            assert 3.5 <= ratio <= 4.5

    def test_near_base_point(self, rng):
        xi = random_direction(rng, 3)
        x = exp_map(xi.base, 1e-3 * radial_field(xi, random_spd(rng, 3)))
        J = radial_jacobian_fd(xi, x, 1e-4)
        assert np.all(np.isfinite(J.images))

    def test_bad_step(self, rng):
        with pytest.raises(InputError):
            radial_jacobian_fd(random_direction(rng, 2), np.eye(2), 0.0)
