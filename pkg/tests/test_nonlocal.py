import numpy as np
import pytest

from cisr.nonlocal_op import BandwidthNet, NonLocalConfig, nonlocal_filter
from cisr.params import ParameterSet
from cisr.reference import (finite_difference_grad, max_rel_error,
                            nonlocal_filter_naive)
from cisr.tensor import Tensor


def rand_inputs(seed, C=3, H=8, W=8, requires_grad=False):
    rng = np.random.default_rng(seed)
    z = Tensor(rng.random((1, C, H, W)), requires_grad=requires_grad,
               dtype=np.float64)
    g = Tensor(rng.random((1, C, H, W)), requires_grad=requires_grad,
               dtype=np.float64)
    h = Tensor(0.2 + rng.random((1, 1, H, W)), requires_grad=requires_grad,
               dtype=np.float64)
    d = (rng.random((1, 1, H, W)) > 0.3).astype(np.float64)
    return z, g, h, d


class TestForward:
    def test_window_zero_is_identity(self):
        z, g, h, d = rand_inputs(0)
        cfg = NonLocalConfig(patch_radius=2, window_radius=0)
        u = nonlocal_filter(z, g, d, h, cfg)
        np.testing.assert_allclose(u.data, z.data, atol=1e-12)

    def test_constant_g_gives_window_mean(self):
        rng = np.random.default_rng(1)
        z = Tensor(rng.random((1, 3, 9, 9)), dtype=np.float64)
        g = Tensor(np.full((1, 3, 9, 9), 0.4), dtype=np.float64)
        h = Tensor(np.full((1, 1, 9, 9), 0.5), dtype=np.float64)
        d = np.ones((1, 1, 9, 9))
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        u = nonlocal_filter(z, g, d, h, cfg)
        # all similarities equal -> plain window mean over in-image candidates
        i, j = 4, 4
        want = z.data[0, :, i - 2:i + 3, j - 2:j + 3].mean(axis=(1, 2))
        np.testing.assert_allclose(u.data[0, :, i, j], want, atol=1e-10)

    def test_matches_brute_force_full_window(self):
        z, g, h, d = rand_inputs(2, H=16, W=16)
        cfg = NonLocalConfig(patch_radius=2, window_radius=16)
        u = nonlocal_filter(z, g, d, h, cfg)
        want = nonlocal_filter_naive(z.data[0], g.data[0], d[0, 0], h.data[0, 0],
                                     patch_radius=2, window_radius=16)
        np.testing.assert_allclose(u.data[0], want, atol=1e-5)

    def test_matches_brute_force_small_window(self):
        z, g, h, d = rand_inputs(3, H=10, W=7)
        cfg = NonLocalConfig(patch_radius=1, window_radius=3)
        u = nonlocal_filter(z, g, d, h, cfg)
        want = nonlocal_filter_naive(z.data[0], g.data[0], d[0, 0], h.data[0, 0],
                                     patch_radius=1, window_radius=3)
        np.testing.assert_allclose(u.data[0], want, atol=1e-10)

    def test_shape_mismatch_rejected(self):
        z, g, h, d = rand_inputs(4)
        bad = Tensor(np.zeros((1, 3, 9, 8)))
        with pytest.raises(ValueError):
            nonlocal_filter(z, bad, d, h, NonLocalConfig())


class TestWeightProperties:
    def _weights(self, z, g, h, d, cfg):
        """Recover the normalized weight row of each pixel by probing with
        one-hot z values (the operator is linear in z)."""
        H, W = z.shape[2], z.shape[3]
        rows = np.zeros((H * W, H * W))
        for n in range(H * W):
            probe = np.zeros((1, 1, H, W))
            probe.reshape(-1)[n] = 1.0
            probe = np.repeat(probe, g.shape[1], axis=1)
            u = nonlocal_filter(Tensor(probe, dtype=np.float64), g, d, h, cfg)
            rows[:, n] = u.data[:, :1].reshape(-1)
        return rows

    def test_rows_sum_to_one_and_nonnegative(self):
        z, g, h, d = rand_inputs(5, H=6, W=6)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        rows = self._weights(z, g, h, d, cfg)
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-5)
        assert np.all(rows >= 0)

    def test_blocked_candidates_have_zero_weight(self):
        z, g, h, d = rand_inputs(6, H=6, W=6)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        rows = self._weights(z, g, h, d, cfg)
        blocked = d.reshape(-1) == 0
        for m in range(36):
            for n in range(36):
                if n != m and blocked[n]:
                    assert rows[m, n] == 0.0

    def test_output_within_window_envelope(self):
        z, g, h, d = rand_inputs(7, H=8, W=8)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        u = nonlocal_filter(z, g, d, h, cfg).data
        wr = 2
        for i in range(8):
            for j in range(8):
                win = z.data[0, :, max(0, i - wr):i + wr + 1,
                             max(0, j - wr):j + wr + 1]
                assert np.all(u[0, :, i, j] >= win.min(axis=(1, 2)) - 1e-9)
                assert np.all(u[0, :, i, j] <= win.max(axis=(1, 2)) + 1e-9)

    def test_large_h_approaches_window_mean(self):
        z, g, h, d = rand_inputs(8, H=9, W=9)
        d = np.ones_like(d)
        big_h = Tensor(np.full(h.shape, 1e3), dtype=np.float64)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        u = nonlocal_filter(z, g, np.ones_like(d), big_h, cfg).data
        i, j = 4, 4
        want = z.data[0, :, i - 2:i + 3, j - 2:j + 3].mean(axis=(1, 2))
        np.testing.assert_allclose(u[0, :, i, j], want, atol=1e-3)

    def test_locality(self):
        # edits outside window + patch support leave the center pixel alone
        z, g, h, d = rand_inputs(9, H=12, W=12)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        u0 = nonlocal_filter(z, g, d, h, cfg).data[0, :, 6, 6].copy()
        z2 = Tensor(z.data.copy(), dtype=np.float64)
        g2 = Tensor(g.data.copy(), dtype=np.float64)
        z2.data[0, :, 0, 0] += 0.5
        g2.data[0, :, 11, 11] -= 0.5
        u1 = nonlocal_filter(z2, g2, d, h, cfg).data[0, :, 6, 6]
        np.testing.assert_array_equal(u0, u1)


class TestGradients:
    @pytest.mark.parametrize("wrap", [False, True])
    def test_z_g_h_gradients(self, wrap):
        z, g, h, d = rand_inputs(10, C=2, H=5, W=5, requires_grad=True)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        rng = np.random.default_rng(11)
        c = Tensor(rng.standard_normal((1, 2, 5, 5)), dtype=np.float64)

        def loss():
            return (nonlocal_filter(z, g, d, h, cfg, wrap=wrap) * c).sum()

        for leaf in (z, g, h):
            leaf.grad = None
        loss().backward()
        for leaf in (z, g, h):
            numeric = finite_difference_grad(lambda: loss().item(), leaf.data,
                                             eps=1e-4)
            assert max_rel_error(leaf.grad, numeric) < 1e-4

    def test_wrap_translation_covariance(self):
        z, g, h, d = rand_inputs(12, H=8, W=8)
        d = np.ones_like(d)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        u0 = nonlocal_filter(z, g, d, h, cfg, wrap=True).data
        roll = lambda a: np.roll(a, (3, 2), axis=(-2, -1))
        u1 = nonlocal_filter(Tensor(roll(z.data), dtype=np.float64),
                             Tensor(roll(g.data), dtype=np.float64),
                             roll(d), Tensor(roll(h.data), dtype=np.float64),
                             cfg, wrap=True).data
        np.testing.assert_allclose(roll(u0), u1, atol=1e-10)


class TestBandwidthNet:
    def test_zero_final_layer_gives_epsilon(self):
        pset = ParameterSet()
        rng = np.random.default_rng(13)
        net = BandwidthNet(pset, "h.", 3, rng)
        net.conv2.weight.data[:] = 0
        net.conv2.bias.data[:] = 0
        g = Tensor(rng.random((1, 3, 6, 6)).astype(np.float32))
        hmap = net(g, epsilon_h=1e-2)
        np.testing.assert_allclose(hmap.data, 1e-2, atol=1e-8)

    def test_output_shape_matches_input(self):
        pset = ParameterSet()
        rng = np.random.default_rng(14)
        net = BandwidthNet(pset, "h.", 3, rng)
        for H, W in [(5, 7), (12, 4)]:
            g = Tensor(rng.random((1, 3, H, W)).astype(np.float32))
            assert net(g, 1e-2).shape == (1, 1, H, W)

    def test_gradient_through_net(self):
        pset = ParameterSet()
        rng = np.random.default_rng(15)
        net = BandwidthNet(pset, "h.", 2, rng, width=4)
        for t in pset.tensors():
            t.data = t.data.astype(np.float64)
        g = Tensor(rng.random((1, 2, 5, 5)), dtype=np.float64)

        def loss():
            return net(g, 1e-2).mean()

        for name in pset.names():
            leaf = pset[name]
            leaf.grad = None
            loss().backward()
            analytic = leaf.grad
            numeric = finite_difference_grad(lambda: loss().item(), leaf.data,
                                             eps=1e-4)
            assert max_rel_error(analytic, numeric) < 1e-4
            pset.zero_grad()
