import numpy as np
import pytest

from oracles import dense_operator
from sg3d import (DimensionMismatch, ForwardModel, Volume, apply_adjoint,
                  apply_forward, degrade, upsample_nearest)
from sg3d.forward import block_average_factor

RNG = np.random.default_rng(1234)


def random_volume(shape, rng=RNG):
    return Volume(rng.uniform(0, 1, shape).astype(np.float32))


def model_dense(model):
    h, w = model.domain_slice_shape
    return dense_operator(
        lambda x: apply_forward(model, x[None].astype(np.float32)).data[0], (h, w))


class TestApplyForward:
    def test_identity_returns_input(self):
        model = ForwardModel.identity((8, 8))
        vol = random_volume((3, 8, 8))
        out = apply_forward(model, vol)
        np.testing.assert_array_equal(out.data, vol.data)

    def test_downsample_constant(self):
        model = ForwardModel.downsample((8, 8), factor=2)
        vol = Volume(np.full((2, 8, 8), 0.37, np.float32))
        out = apply_forward(model, vol)
        assert out.dims == (2, 4, 4)
        np.testing.assert_allclose(out.data, 0.37, rtol=1e-6)

    def test_downsample_k4_matches_dense_oracle(self):
        # dense 4-block-average matrix built by enumerating basis vectors
        model = ForwardModel.downsample((8, 8), factor=4)
        A = model_dense(model)
        x = RNG.uniform(0, 1, (8, 8)).astype(np.float32)
        out = apply_forward(model, x[None]).data[0]
        np.testing.assert_allclose(out.ravel(), A @ x.ravel().astype(np.float64),
                                   rtol=1e-5, atol=1e-7)

    def test_single_axis_flag(self):
        model = ForwardModel.downsample((8, 6), factor=2, axes="y")
        vol = random_volume((2, 8, 6))
        out = apply_forward(model, vol)
        assert out.dims == (2, 4, 6)
        np.testing.assert_allclose(
            out.data, 0.5 * (vol.data[:, 0::2] + vol.data[:, 1::2]), rtol=1e-5)

    def test_dimension_mismatch(self):
        model = ForwardModel.downsample((8, 8), factor=2)
        with pytest.raises(DimensionMismatch):
            apply_forward(model, random_volume((2, 8, 6)))


class TestAdjoint:
    @pytest.mark.parametrize("model", [
        ForwardModel.identity((6, 8)),
        ForwardModel.downsample((8, 8), factor=2),
        ForwardModel.downsample((8, 4), factor=4, axes="y"),
        ForwardModel.separable(RNG.standard_normal((5, 7)), RNG.standard_normal((3, 6))),
    ])
    def test_adjoint_pairing(self, model):
        rng = np.random.default_rng(7)
        h, w = model.domain_slice_shape
        hh, ww = model.range_slice_shape
        for _ in range(100):
            x = rng.standard_normal((1, h, w)).astype(np.float32)
            y = rng.standard_normal((1, hh, ww)).astype(np.float32)
            ax = apply_forward(model, x).data.astype(np.float64)
            aty = apply_adjoint(model, y).data.astype(np.float64)
            lhs = np.vdot(ax, y.astype(np.float64))
            rhs = np.vdot(x.astype(np.float64), aty)
            assert abs(lhs - rhs) <= 1e-5 * np.linalg.norm(x) * np.linalg.norm(y) + 1e-9

    def test_identity_adjoint(self):
        model = ForwardModel.identity((4, 4))
        vol = random_volume((2, 4, 4))
        np.testing.assert_array_equal(apply_adjoint(model, vol).data, vol.data)

    def test_downsample_adjoint_of_delta(self):
        # transpose of the dense oracle: delta spreads as a 1/4-weighted block
        model = ForwardModel.downsample((4, 4), factor=2)
        delta = np.zeros((1, 2, 2), np.float32)
        delta[0, 1, 0] = 1.0
        out = apply_adjoint(model, delta).data[0]
        expected = np.zeros((4, 4))
        expected[2:4, 0:2] = 0.25
        np.testing.assert_allclose(out, expected, atol=1e-7)
        A = model_dense(model)
        np.testing.assert_allclose(out.ravel(), A.T @ delta.ravel(), atol=1e-6)


class TestSvdFactors:
    @pytest.mark.parametrize("m,k", [(8, 2), (8, 4), (12, 3), (6, 6)])
    def test_block_average_factor_is_svd(self, m, k):
        fac = block_average_factor(m, k)
        dense = np.repeat(np.eye(m // k), k, axis=1) / k
        np.testing.assert_allclose(fac.dense(), dense, atol=1e-12)
        # V orthonormal, singular values 1/sqrt(k) then zeros
        np.testing.assert_allclose(fac.V.T @ fac.V, np.eye(m), atol=1e-6)
        np.testing.assert_allclose(fac.s[: m // k], 1 / np.sqrt(k), atol=1e-12)
        np.testing.assert_allclose(fac.s[m // k:], 0, atol=1e-12)
        sv_numeric = np.linalg.svd(dense, compute_uv=False)
        np.testing.assert_allclose(np.sort(fac.s)[::-1][: len(sv_numeric)],
                                   sv_numeric, atol=1e-10)

    @pytest.mark.parametrize("shape", [(8, 8), (16, 12), (64, 64)])
    def test_svd_reconstruction(self, shape):
        rng = np.random.default_rng(3)
        model = ForwardModel.separable(rng.standard_normal((shape[0] // 2, shape[0])),
                                       rng.standard_normal((shape[1], shape[1])))
        A = model_dense(model)
        Ay = model.y_factor.dense()
        Ax = model.x_factor.dense()
        A_fac = np.kron(Ay, Ax)
        assert np.linalg.norm(A - A_fac) / np.linalg.norm(A) <= 1e-5

    def test_ata_equals_v_s2_vt(self):
        model = ForwardModel.downsample((8, 8), factor=2)
        rng = np.random.default_rng(11)
        V = np.kron(model.y_factor.V, model.x_factor.V)
        s2 = model.singular_values_2d().ravel() ** 2
        for _ in range(20):
            x = rng.standard_normal((1, 8, 8)).astype(np.float32)
            ata = apply_adjoint(model, apply_forward(model, x)).data.ravel()
            ref = V @ (s2 * (V.T @ x.astype(np.float64).ravel()))
            assert np.linalg.norm(ata - ref) <= 1e-5 * np.linalg.norm(ref) + 1e-7

    def test_downsample_nn_upsample_projection(self):
        model = ForwardModel.downsample((8, 8), factor=2)
        vol = random_volume((2, 8, 8))
        proj = lambda v: upsample_nearest(apply_forward(model, v), 2)
        once = proj(vol)
        twice = proj(once)
        np.testing.assert_allclose(once.data, twice.data, atol=1e-6)


class TestDegrade:
    def test_sigma_zero_equals_forward(self):
        model = ForwardModel.downsample((8, 8), 2, noise_sigma=0.0)
        vol = random_volume((2, 8, 8))
        np.testing.assert_array_equal(degrade(model, vol, seed=5).data,
                                      apply_forward(model, vol).data)

    def test_deterministic_given_seed(self):
        model = ForwardModel.identity((8, 8), noise_sigma=0.2)
        vol = random_volume((2, 8, 8))
        a = degrade(model, vol, seed=42).data
        b = degrade(model, vol, seed=42).data
        np.testing.assert_array_equal(a, b)
        c = degrade(model, vol, seed=43).data
        assert not np.array_equal(a, c)

    def test_noise_sd_law_of_large_numbers(self):
        model = ForwardModel.identity((100, 100), noise_sigma=0.1)
        vol = Volume(np.full((100, 100, 100), 0.5, np.float32))
        noisy = degrade(model, vol, seed=9)
        sd = np.std(noisy.data.astype(np.float64) - 0.5)
        assert abs(sd - 0.1) < 0.001  # 1e6 voxels, within 1%
