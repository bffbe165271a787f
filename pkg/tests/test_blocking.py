"""Tests for the blocking-artefact detector d(.)."""

import numpy as np

from cisr.blocking import detect_blocking, detect_blocking_batch


def tiles_image(levels, block=8):
    """Constant 8x8 tiles with the given per-tile gray levels (2-d grid)."""
    levels = np.asarray(levels, dtype=np.float32)
    return np.kron(levels, np.ones((block, block), dtype=np.float32))


class TestDetector:
    def test_uniform_image_all_ones(self):
        d = detect_blocking(np.full((3, 24, 24), 0.3, dtype=np.float32))
        assert np.all(d.values == 1)

    def test_step_tiles_marked_on_boundary_band(self):
        img = tiles_image([[0.2, 0.7, 0.7]])          # jump at column 8 only
        d = detect_blocking(img).values
        assert d.shape == (8, 24)
        # the two columns adjacent to the jump are flagged
        assert np.all(d[:, 7] == 0) and np.all(d[:, 8] == 0)
        # everything else, including the smooth boundary at column 16, is kept
        keep = np.ones_like(d)
        keep[:, 7:9] = 0
        assert np.array_equal(d == 1, keep == 1)

    def test_zeros_only_within_one_pixel_of_grid(self):
        rng = np.random.default_rng(0)
        img = tiles_image(rng.random((4, 4)))
        d = detect_blocking(img).values
        band = np.zeros(32, dtype=bool)
        for r in (8, 16, 24):
            band[r - 1] = band[r] = True
        for r, c in zip(*np.where(d == 0)):
            assert band[r] or band[c]

    def test_smooth_ramp_not_flagged(self):
        # constant gradient: boundary diff equals the local in-block diff,
        # so no boundary stands out
        ramp = np.tile(np.linspace(0, 1, 32, dtype=np.float32), (32, 1))
        d = detect_blocking(ramp).values
        assert np.all(d == 1)

    def test_tiny_jump_below_tau_not_flagged(self):
        img = tiles_image([[0.5, 0.5 + 1.0 / 255.0]])
        d = detect_blocking(img, tau=2.0 / 255.0).values
        assert np.all(d == 1)

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(1)
        base = tiles_image(rng.random((3, 3)))
        img = base + 0.02 * rng.random(base.shape).astype(np.float32)
        zeros = [int((detect_blocking(img, alpha=a).values == 0).sum())
                 for a in (1.0, 2.0, 4.0, 8.0)]
        assert all(b <= a for a, b in zip(zeros, zeros[1:]))

    def test_both_axes_detected(self):
        img = tiles_image([[0.2], [0.8]])             # jump at row 8
        d = detect_blocking(img).values
        assert np.all(d[7] == 0) and np.all(d[8] == 0)

    def test_channel_mean_drives_detection(self):
        # opposite jumps in two channels cancel in the gray image
        img = np.zeros((3, 8, 16), dtype=np.float32)
        img[0, :, 8:] = 0.6
        img[1, :, 8:] = -0.6 + 0.5
        img[1, :, :8] = 0.5
        gray_jump = np.abs(img.mean(axis=0)[:, 8] - img.mean(axis=0)[:, 7])
        d = detect_blocking(img).values
        assert np.all((d[:, 7] == 0) == (gray_jump > 2.0 / 255.0))


class TestBatch:
    def test_shape_and_values(self):
        rng = np.random.default_rng(2)
        z = rng.random((2, 3, 16, 16), dtype=np.float32)
        d = detect_blocking_batch(z)
        assert d.shape == (2, 1, 16, 16)
        assert set(np.unique(d)) <= {0.0, 1.0}

    def test_matches_single_image_path(self):
        rng = np.random.default_rng(3)
        z = (rng.random((2, 3, 24, 24), dtype=np.float32) * 4).round() / 4
        batch = detect_blocking_batch(z)
        for b in range(2):
            single = detect_blocking(z[b]).values
            assert np.array_equal(batch[b, 0], single.astype(batch.dtype))
