import numpy as np
import pytest

from oracles import dense_operator
from sg3d import (ForwardModel, LikelihoodStepParams, NonFiniteError, Volume,
                  apply_forward, likelihood_mean, likelihood_sample)


def vol(arr):
    return Volume(np.asarray(arr, np.float32))


def dense_of(model):
    h, w = model.domain_slice_shape
    return dense_operator(
        lambda x: apply_forward(model, x[None].astype(np.float32)).data[0], (h, w))


class TestMean:
    def test_equal_precisions_average(self):
        model = ForwardModel.identity((4, 4), noise_sigma=1.0)
        rng = np.random.default_rng(0)
        y, z, w = (vol(rng.uniform(0, 1, (2, 4, 4))) for _ in range(3))
        p = LikelihoodStepParams(rho_d=1.0, rho_tv=1.0, sigma=1.0)
        mu = likelihood_mean(model, y, z, w, p)
        np.testing.assert_allclose(mu.data, (y.data + z.data + w.data) / 3, atol=1e-6)

    def test_zero_operator_ignores_data(self):
        model = ForwardModel.separable(np.zeros((2, 4)), np.zeros((3, 4)))
        rng = np.random.default_rng(1)
        y = vol(rng.uniform(0, 1, (1, 2, 3)))
        z = vol(rng.uniform(0, 1, (1, 4, 4)))
        w = vol(rng.uniform(0, 1, (1, 4, 4)))
        rho_d, rho_tv = 0.5, 2.0
        p = LikelihoodStepParams(rho_d=rho_d, rho_tv=rho_tv, sigma=0.1)
        mu = likelihood_mean(model, y, z, w, p)
        expected = ((z.data / rho_d**2 + w.data / rho_tv**2)
                    / (1 / rho_d**2 + 1 / rho_tv**2))
        np.testing.assert_allclose(mu.data, expected, atol=1e-6)

    def test_matches_dense_solve(self):
        # 16x16 slice problem against a dense linear-algebra oracle
        rng = np.random.default_rng(2)
        model = ForwardModel.separable(rng.standard_normal((8, 16)) / 4,
                                       rng.standard_normal((16, 16)) / 4,
                                       noise_sigma=0.3)
        A = dense_of(model)
        y = vol(rng.uniform(0, 1, (1, 8, 16)))
        z = vol(rng.uniform(0, 1, (1, 16, 16)))
        w = vol(rng.uniform(0, 1, (1, 16, 16)))
        p = LikelihoodStepParams(rho_d=0.7, rho_tv=1.3, sigma=0.3)
        n = 16 * 16
        lam = (A.T @ A / p.sigma**2 + np.eye(n) / p.rho_d**2 + np.eye(n) / p.rho_tv**2)
        rhs = (A.T @ y.data.ravel().astype(np.float64) / p.sigma**2
               + z.data.ravel() / p.rho_d**2 + w.data.ravel() / p.rho_tv**2)
        expected = np.linalg.solve(lam, rhs)
        mu = likelihood_mean(model, y, z, w, p).data.ravel()
        np.testing.assert_allclose(mu, expected, rtol=1e-4, atol=1e-6)

    def test_coupling_symmetry(self):
        model = ForwardModel.downsample((8, 8), 2, noise_sigma=0.2)
        rng = np.random.default_rng(3)
        y = vol(rng.uniform(0, 1, (1, 4, 4)))
        z = vol(rng.uniform(0, 1, (1, 8, 8)))
        w = vol(rng.uniform(0, 1, (1, 8, 8)))
        a = likelihood_mean(model, y, z, w,
                            LikelihoodStepParams(rho_d=0.5, rho_tv=1.5, sigma=0.2))
        b = likelihood_mean(model, y, w, z,
                            LikelihoodStepParams(rho_d=1.5, rho_tv=0.5, sigma=0.2))
        np.testing.assert_allclose(a.data, b.data, atol=1e-6)

    def test_rejects_nonfinite(self):
        model = ForwardModel.identity((4, 4), noise_sigma=1.0)
        bad = np.full((1, 4, 4), np.nan, np.float64)
        good = vol(np.zeros((1, 4, 4)))
        p = LikelihoodStepParams(1, 1, 1)
        from sg3d.likelihood import window_mean_sample
        with pytest.raises(NonFiniteError):
            window_mean_sample(model, bad, good.data.astype(float),
                               good.data.astype(float), p, None)


class TestSample:
    def test_zero_noise_returns_mean(self):
        model = ForwardModel.downsample((8, 8), 2, noise_sigma=0.1)
        rng = np.random.default_rng(4)
        y = vol(rng.uniform(0, 1, (2, 4, 4)))
        z = vol(rng.uniform(0, 1, (2, 8, 8)))
        w = vol(rng.uniform(0, 1, (2, 8, 8)))
        p = LikelihoodStepParams(rho_d=0.5, rho_tv=0.5, sigma=0.1)
        mu = likelihood_mean(model, y, z, w, p)
        s = likelihood_sample(model, y, z, w, p, np.random.default_rng(0),
                              noise_scale=0.0)
        np.testing.assert_array_equal(s.data, mu.data)

    def test_scalar_conjugacy_moments(self):
        # identity model, all precisions 1: posterior N((y+z+w)/3, 1/3);
        # 1e5 independent draws realized as 1e5 independent slices
        n = 100_000
        model = ForwardModel.identity((1, 1), noise_sigma=1.0)
        y = vol(np.full((n, 1, 1), 0.9))
        z = vol(np.full((n, 1, 1), 0.3))
        w = vol(np.full((n, 1, 1), 0.6))
        p = LikelihoodStepParams(1.0, 1.0, 1.0)
        draws = likelihood_sample(model, y, z, w, p,
                                  np.random.default_rng(5)).data.ravel()
        mu, var = 0.6, 1.0 / 3.0
        se = np.sqrt(var / n)
        assert abs(draws.mean() - mu) < 4 * se
        assert abs(draws.var() / var - 1) < 0.05

    def test_covariance_matches_dense_oracle(self):
        # 8x8 slice problem: empirical covariance of 1e5 draws vs dense
        # Lambda^{-1}, within 5% Frobenius
        rng = np.random.default_rng(6)
        model = ForwardModel.downsample((8, 8), 2, noise_sigma=0.25)
        A = dense_of(model)
        p = LikelihoodStepParams(rho_d=0.8, rho_tv=1.1, sigma=0.25)
        n = 64
        lam = A.T @ A / p.sigma**2 + np.eye(n) / p.rho_d**2 + np.eye(n) / p.rho_tv**2
        cov_true = np.linalg.inv(lam)
        reps = 100_000
        y = vol(np.tile(rng.uniform(0, 1, (1, 4, 4)), (reps, 1, 1)))
        z = vol(np.tile(rng.uniform(0, 1, (1, 8, 8)), (reps, 1, 1)))
        w = vol(np.tile(rng.uniform(0, 1, (1, 8, 8)), (reps, 1, 1)))
        draws = likelihood_sample(model, y, z, w, p, np.random.default_rng(7))
        flat = draws.data.reshape(reps, n).astype(np.float64)
        cov_emp = np.cov(flat.T)
        err = np.linalg.norm(cov_emp - cov_true) / np.linalg.norm(cov_true)
        assert err < 0.05

    def test_affine_in_noise(self):
        # substituting canonical basis noise vectors reconstructs L with
        # L L^T = Lambda^{-1}
        class BasisRng:
            def __init__(self, k):
                self.k = k

            def standard_normal(self, shape):
                e = np.zeros(int(np.prod(shape)))
                e[self.k] = 1.0
                return e.reshape(shape)

        model = ForwardModel.downsample((4, 4), 2, noise_sigma=0.5)
        rng = np.random.default_rng(8)
        y = vol(rng.uniform(0, 1, (1, 2, 2)))
        z = vol(rng.uniform(0, 1, (1, 4, 4)))
        w = vol(rng.uniform(0, 1, (1, 4, 4)))
        p = LikelihoodStepParams(rho_d=0.6, rho_tv=0.9, sigma=0.5)
        mu = likelihood_mean(model, y, z, w, p).data.astype(np.float64).ravel()
        n = 16
        L = np.empty((n, n))
        for k in range(n):
            s = likelihood_sample(model, y, z, w, p, BasisRng(k))
            L[:, k] = s.data.astype(np.float64).ravel() - mu
        A = dense_of(model)
        lam = A.T @ A / p.sigma**2 + np.eye(n) / p.rho_d**2 + np.eye(n) / p.rho_tv**2
        np.testing.assert_allclose(L @ L.T, np.linalg.inv(lam), rtol=1e-3, atol=1e-5)


class TestSigmaZeroLimit:
    def test_identity_pins_to_data(self):
        model = ForwardModel.identity((4, 4), noise_sigma=0.0)
        rng = np.random.default_rng(9)
        y = vol(rng.uniform(0, 1, (1, 4, 4)))
        z = vol(rng.uniform(0, 1, (1, 4, 4)))
        w = vol(rng.uniform(0, 1, (1, 4, 4)))
        p = LikelihoodStepParams(rho_d=0.5, rho_tv=0.5, sigma=0.0)
        mu = likelihood_mean(model, y, z, w, p)
        np.testing.assert_allclose(mu.data, y.data, atol=1e-6)

    def test_downsample_limit_matches_small_sigma(self):
        model0 = ForwardModel.downsample((4, 4), 2, noise_sigma=0.0)
        model_eps = ForwardModel.downsample((4, 4), 2, noise_sigma=1e-7)
        rng = np.random.default_rng(10)
        y = vol(rng.uniform(0, 1, (1, 2, 2)))
        z = vol(rng.uniform(0, 1, (1, 4, 4)))
        w = vol(rng.uniform(0, 1, (1, 4, 4)))
        p0 = LikelihoodStepParams(0.5, 0.5, 0.0)
        pe = LikelihoodStepParams(0.5, 0.5, 1e-7)
        np.testing.assert_allclose(likelihood_mean(model0, y, z, w, p0).data,
                                   likelihood_mean(model_eps, y, z, w, pe).data,
                                   atol=1e-4)
