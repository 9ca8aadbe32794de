import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from filaments.errors import EigengapDegenerateError, InvalidInputError, SingularHessianError
from filaments.kernel_density import KernelProfile
from filaments.rng import stream
from filaments.theory import (AnalyticDensity, asymptotic_mu_sigma, asymptotic_rho2, axis_gaussian, banana,
                              circle_mixture, clt_gradient_check, constrained_mode_check, gaussian_1d,
                              is_oracle_ridge, mode_condition_suite, monte_carlo_rho2, polish_ridge_point,
                              subspace_quantities)
from filaments.validation import fd_relative_error, random_mixture

Y_AXIS = np.array([[0.0], [1.0]])


class TestAnalyticDensity:
    def test_gradient_at_mean(self):
        g = AnalyticDensity(np.ones(1), np.zeros((1, 2)), np.eye(2)[None])
        assert np.allclose(g.evaluate(np.zeros(2), 1), 0)
        assert g.evaluate(np.zeros(2), 0) == pytest.approx(1 / (2 * math.pi))

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_finite_differences(self, order):
        mix = random_mixture(2, 3, stream(1, "test"))
        Q = stream(2, "test").uniform(-1.5, 1.5, size=(100, 2))
        assert fd_relative_error(mix.evaluate, Q, order) < 1e-6

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            AnalyticDensity(np.array([0.5, 0.6]), np.zeros((2, 2)), np.stack([np.eye(2)] * 2))
        with pytest.raises(InvalidInputError):
            AnalyticDensity(np.ones(1), np.zeros((1, 2)), np.array([[[1.0, 2.0], [2.0, 1.0]]]))
        g = AnalyticDensity(np.ones(1), np.zeros((1, 2)), np.eye(2)[None])
        with pytest.raises(InvalidInputError):
            g.evaluate(np.zeros(2), 5)

    def test_sample_moments(self):
        t = axis_gaussian()
        X = t.sample(20000, stream(0, "test"))
        assert np.allclose(np.cov(X.T), np.diag([4.0, 1.0]), atol=0.15)

    def test_circle_ridge_is_oracle(self):
        t = circle_mixture()
        pmax = t.density(t.ridge.points).max()
        for x in t.ridge.points[::90]:
            assert is_oracle_ridge(t, x, 0.1, pmax)
            y, gn, ok = polish_ridge_point(t, x)
            assert ok and gn <= 1e-10 and np.allclose(y, x, atol=1e-8)

    def test_known_ridge_normals(self):
        t = circle_mixture(ridge_points=36)
        for x, N in zip(t.ridge.points, t.ridge.normals):
            radial = x / np.linalg.norm(x)
            assert abs(abs(N[:, 0] @ radial) - 1) < 1e-6


class TestSubspace:
    def test_axis_gaussian(self):
        t = axis_gaussian()
        gL, HL = subspace_quantities(t, [1.0, 0.0], Y_AXIS)
        assert np.allclose(gL, 0)
        assert HL.shape == (1, 1) and HL[0, 0] < 0

    def test_matches_dense(self, rng):
        mix = random_mixture(3, 2, rng)
        x = rng.normal(size=3)
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        L = Q[:, 1:]
        gL, HL = subspace_quantities(mix, x, L)
        assert np.allclose(HL, L.T @ mix.evaluate(x, 2) @ L, rtol=0, atol=1e-12)
        assert np.allclose(gL, L.T @ mix.evaluate(x, 1), rtol=0, atol=1e-12)

    def test_non_orthonormal(self):
        with pytest.raises(InvalidInputError):
            subspace_quantities(axis_gaussian(), [0.0, 0.0], np.array([[0.0], [2.0]]))


class TestProfile:
    def test_axis_zero_bias(self):
        t = axis_gaussian()
        A = t.ridge.points[::20]
        prof = asymptotic_mu_sigma(t, A, Y_AXIS)
        assert np.allclose(prof.mu, 0, atol=1e-15)
        S = prof.Sigma[:, 0, 0]
        assert np.all(S > 0)
        # at a fixed subspace Hessian Sigma is linear in p
        HL = np.array([subspace_quantities(t, x, Y_AXIS)[1][0, 0] for x in A])
        J = KernelProfile(2).grad_outer_integral[1, 1]
        assert np.allclose(S * HL ** 2 / prof.density, J, rtol=1e-10)

    def test_sigma_psd(self):
        t = circle_mixture()
        A = t.ridge.points[::40]
        prof = asymptotic_mu_sigma(t, A, t.ridge.normals[::40])
        for S in prof.Sigma:
            assert np.allclose(S, S.T) and np.all(np.linalg.eigvalsh(S) >= 0)

    def test_banana_apex_bias(self):
        t = banana()
        P, N = t.ridge.points, t.ridge.normals
        prof = asymptotic_mu_sigma(t, P, N)
        mu = np.linalg.norm(prof.mu, axis=1)
        apex = np.argmin(np.abs(P[:, 0]))
        flank = np.abs(P[:, 0]) > 0.6
        assert mu[apex] > 0
        assert mu[apex] > mu[flank].mean()

    def test_singular(self):
        class Flat:
            def evaluate(self, x, order):
                return np.zeros((2,) * order) if order else 1.0

        with pytest.raises(SingularHessianError):
            asymptotic_mu_sigma(Flat(), [[0.0, 0.0]], Y_AXIS)

    def test_off_ridge(self):
        with pytest.raises(InvalidInputError):
            asymptotic_mu_sigma(axis_gaussian(), [[0.0, 0.5]], Y_AXIS)

    def test_rho2_algebra(self):
        t = axis_gaussian()
        prof = asymptotic_mu_sigma(t, t.ridge.points[::50], Y_AXIS)
        a = asymptotic_rho2(prof, 1000, 0.5)
        b = asymptotic_rho2(prof, 2000, 0.5)
        S = prof.Sigma[:, 0, 0]
        assert np.allclose(a, S ** 2 / (1000 * 0.5 ** 4))
        assert np.allclose(asymptotic_rho2(prof, 1000, 0.5, trace_power=1), S / (1000 * 0.5 ** 4))
        assert np.allclose(b, a / 2)
        # bias-only limit
        c = circle_mixture()
        pc = asymptotic_mu_sigma(c, c.ridge.points[:3], c.ridge.normals[:3])
        big = asymptotic_rho2(pc, 10 ** 18, 0.3)
        assert np.allclose(big, np.sum(pc.mu ** 2, axis=1) * 0.3 ** 4, rtol=1e-6)


class TestModeConditions:
    def test_aligned(self):
        r = constrained_mode_check([1.0, -1.0], np.eye(2), np.eye(2))
        assert r.sufficient_holds and r.necessary_holds
        assert r.alignment == 1.0 and r.threshold == 0.5
        assert r.diagonal[0] == -1.0

    def test_swapped(self):
        r = constrained_mode_check([1.0, -1.0], np.eye(2), np.eye(2)[:, ::-1])
        assert not r.necessary_holds and r.diagonal[0] == 1.0

    def test_tie(self):
        with pytest.raises(EigengapDegenerateError):
            constrained_mode_check([-1.0, -1.0], np.eye(2), np.eye(2))

    def test_suite_implications(self):
        res = mode_condition_suite(1000)
        assert res["cases"] == 1000
        assert res["sufficient_not_necessary"] == 0
        assert res["sufficient_not_nd"] == 0
        assert res["nd_not_necessary"] == 0
        # the diagonal condition alone does not force definiteness in d >= 3
        assert res["per_dim"]["2"]["necessary_not_nd"] == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([2, 3]))
def test_sufficient_implies_negative_definite(seed, d):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.standard_normal(d))[::-1]
    if lam[1] >= 0 or lam[0] - lam[1] < 1e-6:
        return
    V, _ = np.linalg.qr(rng.standard_normal((d, d)))
    E, _ = np.linalg.qr(rng.standard_normal((d, d)))
    r = constrained_mode_check(lam, V, E)
    H = V @ np.diag(lam) @ V.T
    nd = np.all(np.linalg.eigvalsh(E[:, 1:].T @ H @ E[:, 1:]) < 0)
    if r.sufficient_holds:
        assert nd and r.necessary_holds
    if nd:
        assert r.necessary_holds


class TestMonteCarlo:
    def test_single_repetition(self):
        t = axis_gaussian()
        A = t.ridge.points[::50]
        mc = monte_carlo_rho2(t, A, 500, 1, seed=3)
        assert mc.repetitions == 1 and np.allclose(mc.rho2, mc.sq_distances[0])
        assert np.isnan(mc.se).all()

    def test_decreases_with_n(self):
        t = circle_mixture()
        A = t.ridge.points[::36]
        small = monte_carlo_rho2(t, A, 500, 10, seed=3, bandwidth=0.25)
        large = monte_carlo_rho2(t, A, 4000, 10, seed=3, bandwidth=0.25)
        assert large.rho2.mean() < small.rho2.mean()

    def test_zero_repetitions(self):
        with pytest.raises(InvalidInputError):
            monte_carlo_rho2(axis_gaussian(), [[0.0, 0.0]], 100, 0)


class TestClt:
    def test_variance_and_mode_mean(self):
        n = 4000
        rep = clt_gradient_check(gaussian_1d(), [0.0], n, n ** (-1 / 7), 2000)
        assert 0.75 <= rep.variance_ratio[0] <= 1.25
        assert abs(rep.mean[0]) <= 3 * rep.mean_se[0]

    def test_bias_shrinks_with_h(self):
        a = clt_gradient_check(gaussian_1d(), [1.0], 20000, 0.4, 200, seed=9)
        b = clt_gradient_check(gaussian_1d(), [1.0], 20000, 0.2, 200, seed=9)
        assert abs(b.raw_mean[0]) * 2 <= abs(a.raw_mean[0])
