"""Network assembly, loss arithmetic, metrics, parameter accounting."""

import numpy as np
import pytest

import depthsr as D
from depthsr.gradient import gradient_map
from depthsr.tensor import Tensor


# --- independent layer-by-layer parameter arithmetic -----------------------

def conv_count(cin, cout, k):
    return cout * cin * k * k + cout


def group_count(c, depth):
    return depth * 2 * conv_count(c, c, 3) + conv_count(c, c, 3)


def attention_count(c, r):
    return conv_count(c, c // r, 1) + conv_count(c // r, c, 1)


def coupling_count(c):
    return 4 * conv_count(c, c, 3)


def calibrator_count(c, depth, r):
    return (conv_count(2, c, 1)
            + 2 * group_count(c, depth)
            + attention_count(c, r)
            + conv_count(c, 1, 3)
            + conv_count(1, c, 3) + group_count(c, depth)
            + conv_count(1, c, 3) + group_count(c, depth)
            + conv_count(c, c, 3))


def block_count(c):
    return (conv_count(2 * c, c, 3)
            + conv_count(c, c, 3)
            + 4 * 2 * conv_count(c, c, 1)
            + 2 * conv_count(2 * c, c, 1)
            + 2 * coupling_count(c)
            + conv_count(c, c, 3))


def refiner_count(c, n, depth):
    return (conv_count(3, c, 3) + group_count(c, depth)
            + conv_count(1, c, 3) + group_count(c, depth)
            + n * block_count(c)
            + group_count(n * c, depth)
            + conv_count(n * c, c, 3)
            + conv_count(c, 1, 3))


def expected_total(c, n, depth, r):
    return calibrator_count(c, depth, r) + refiner_count(c, n, depth)


# ---------------------------------------------------------------------------


def small_net(scale=4, channels=4, count=1, depth=1, seed=0):
    cfg = D.ModelConfig(channels=channels, sdb_count=count, scale=scale,
                        block_depth=depth, attention_ratio=2, seed=seed)
    return D.Network(cfg)


def sample_inputs(scale, lr=4, seed=0):
    rng = np.random.default_rng(seed)
    hr = lr * scale
    rgb = Tensor(rng.uniform(0, 1, (1, 3, hr, hr)))
    depth_lr = Tensor(rng.uniform(0.5, 2.0, (1, 1, lr, lr)))
    depth_hr = Tensor(rng.uniform(0.5, 2.0, (1, 1, hr, hr)))
    return rgb, depth_lr, depth_hr


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            D.ModelConfig(scale=3).validate()
        with pytest.raises(ValueError):
            D.ModelConfig(channels=7, attention_ratio=1).validate()
        with pytest.raises(ValueError):
            D.ModelConfig(channels=6, attention_ratio=4).validate()
        with pytest.raises(ValueError):
            D.ModelConfig(gamma_gra=-0.1).validate()
        with pytest.raises(ValueError):
            D.ModelConfig(sdb_count=0).validate()

    def test_paper_defaults(self):
        cfg = D.ModelConfig()
        assert (cfg.lambda_amp, cfg.lambda_pha) == (0.5, 0.5)
        assert (cfg.gamma_gra, cfg.gamma_fre) == (0.001, 0.002)
        assert cfg.sdb_count == 3


class TestForward:
    @pytest.mark.parametrize("scale", [4, 8, 16])
    def test_zero_head_reduces_to_bicubic_bit_exact(self, scale):
        net = small_net(scale=scale)
        D.zero_output_head(net)
        rgb, depth_lr, _ = sample_inputs(scale)
        pred, _ = net(rgb, depth_lr)
        base = D.bicubic_resize(depth_lr, scale)
        assert np.array_equal(pred.data, base.data)

    @pytest.mark.parametrize("scale", [4, 8, 16])
    def test_output_shape(self, scale):
        net = small_net(scale=scale)
        rgb, depth_lr, _ = sample_inputs(scale)
        pred, grad_sr = net(rgb, depth_lr)
        hr = 4 * scale
        assert pred.data.shape == (1, 1, hr, hr)
        assert grad_sr.data.shape == (1, 1, hr, hr)

    def test_extent_mismatch_rejected(self):
        net = small_net(scale=4)
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError):
            net(Tensor(rng.uniform(0, 1, (1, 3, 12, 12))),
                Tensor(rng.uniform(0.5, 2, (1, 1, 4, 4))))

    def test_same_seed_same_parameters(self):
        a = small_net(seed=5)
        b = small_net(seed=5)
        for (na, pa), (nb, pb) in zip(a.store.items(), b.store.items()):
            assert na == nb and np.array_equal(pa.data, pb.data)


class TestLosses:
    def test_perfect_prediction_zeroes_all_components(self):
        rng = np.random.default_rng(2)
        d_hr = Tensor(rng.uniform(0.5, 2.0, (1, 1, 8, 8)))
        losses = D.compute_losses(d_hr, gradient_map(d_hr), d_hr, D.ModelConfig())
        for value in losses.values().values():
            assert value == 0.0

    def test_constant_offset_example(self):
        rng = np.random.default_rng(3)
        d_hr = Tensor(rng.uniform(0.5, 2.0, (1, 1, 8, 8)))
        g_sr = Tensor(rng.uniform(0, 1, (1, 1, 8, 8)))
        cfg = D.ModelConfig()
        base = D.compute_losses(d_hr, g_sr, d_hr, cfg)
        shifted = D.compute_losses(Tensor(d_hr.data + 1.0), g_sr, d_hr, cfg)
        assert abs(shifted.spa.item() - 1.0) < 1e-12
        assert shifted.gra.item() == base.gra.item()
        # the amplitude spectra differ only in the DC bin
        from depthsr.spectral import decompose, dft2
        amp_base = decompose(dft2(d_hr)).amplitude.data
        amp_shift = decompose(dft2(Tensor(d_hr.data + 1.0))).amplitude.data
        diff = np.abs(amp_shift - amp_base)
        assert diff[0, 0, 0, 0] > 1.0
        off_dc = diff.copy()
        off_dc[0, 0, 0, 0] = 0.0
        assert np.max(off_dc) < 1e-9

    def test_recomposition_identity(self):
        rng = np.random.default_rng(4)
        cfg = D.ModelConfig()
        d_sr = Tensor(rng.uniform(0.5, 2.0, (2, 1, 8, 8)))
        d_hr = Tensor(rng.uniform(0.5, 2.0, (2, 1, 8, 8)))
        g_sr = Tensor(rng.uniform(0, 1, (2, 1, 8, 8)))
        L = D.compute_losses(d_sr, g_sr, d_hr, cfg)
        v = L.values()
        assert abs(v["fre"] - (0.5 * v["amp"] + 0.5 * v["pha"])) < 1e-12
        assert abs(v["total"] - (v["spa"] + 0.001 * v["gra"] + 0.002 * v["fre"])) < 1e-12

    def test_zero_gammas_reduce_to_spatial(self):
        rng = np.random.default_rng(5)
        cfg = D.ModelConfig(gamma_gra=0.0, gamma_fre=0.0)
        d_sr = Tensor(rng.uniform(0.5, 2.0, (1, 1, 8, 8)))
        d_hr = Tensor(rng.uniform(0.5, 2.0, (1, 1, 8, 8)))
        g_sr = Tensor(rng.uniform(0, 1, (1, 1, 8, 8)))
        L = D.compute_losses(d_sr, g_sr, d_hr, cfg)
        assert L.total.item() == L.spa.item()

    def test_batch_permutation_invariance(self):
        rng = np.random.default_rng(6)
        cfg = D.ModelConfig()
        d_sr = rng.uniform(0.5, 2.0, (4, 1, 8, 8))
        d_hr = rng.uniform(0.5, 2.0, (4, 1, 8, 8))
        g_sr = rng.uniform(0, 1, (4, 1, 8, 8))
        perm = [2, 0, 3, 1]
        a = D.compute_losses(Tensor(d_sr), Tensor(g_sr), Tensor(d_hr), cfg).total.item()
        b = D.compute_losses(Tensor(d_sr[perm]), Tensor(g_sr[perm]),
                             Tensor(d_hr[perm]), cfg).total.item()
        assert abs(a - b) <= 1e-12 * abs(a)

    def test_shape_mismatch_rejected(self):
        cfg = D.ModelConfig()
        with pytest.raises(ValueError):
            D.compute_losses(Tensor(np.zeros((1, 1, 8, 8))), Tensor(np.zeros((1, 1, 8, 8))),
                             Tensor(np.zeros((1, 1, 6, 6))), cfg)


class TestRmse:
    def test_identical_is_zero(self):
        t = Tensor(np.random.default_rng(7).uniform(0.5, 2, (1, 1, 4, 4)))
        assert D.rmse(t, t) == 0.0

    def test_meter_offset_in_centimeters(self):
        a = np.full((1, 1, 4, 4), 2.0)
        assert abs(D.rmse(Tensor(a + 1.0), Tensor(a), unit_scale=100.0) - 100.0) < 1e-12

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(8)
        a = rng.uniform(0.5, 2, (2, 1, 5, 5))
        b = rng.uniform(0.5, 2, (2, 1, 5, 5))
        acc = 0.0
        count = 0
        for x, y in zip(a.reshape(-1), b.reshape(-1)):
            acc += (x - y) ** 2
            count += 1
        want = 100.0 * np.sqrt(acc / count)
        assert abs(D.rmse(Tensor(a), Tensor(b)) - want) < 1e-10

    def test_errors(self):
        with pytest.raises(ValueError):
            D.rmse(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 2))))
        with pytest.raises(ValueError):
            D.rmse(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 2, 2))),
                   unit_scale=0.0)


class TestParameterAudit:
    def test_audit_matches_for_reference_config(self):
        cfg = D.ModelConfig(channels=8, sdb_count=3, scale=4, block_depth=2,
                            attention_ratio=4)
        net = D.Network(cfg)
        assert net.store.total_parameters() == expected_total(8, 3, 2, 4)

    @pytest.mark.parametrize("c,n,b,r", [(4, 1, 1, 2), (8, 2, 1, 4), (16, 3, 2, 4)])
    def test_audit_matches_other_configs(self, c, n, b, r):
        cfg = D.ModelConfig(channels=c, sdb_count=n, scale=4, block_depth=b,
                            attention_ratio=r)
        net = D.Network(cfg)
        assert net.store.total_parameters() == expected_total(c, n, b, r)

    def test_unique_names(self):
        net = small_net()
        names = net.store.names()
        assert len(names) == len(set(names))
