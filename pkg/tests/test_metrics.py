"""Tests for PSNR, SSIM, and the TSV report."""

import numpy as np
import pytest

from cisr.metrics import psnr, read_report, ssim, write_report
from cisr.reference import ssim_naive


class TestPsnr:
    def test_identity_is_capped(self):
        a = np.random.default_rng(0).random((3, 12, 12))
        assert psnr(a, a) == 99.0

    def test_closed_form_constant_offset(self):
        a = np.full((3, 10, 10), 0.4)
        # mse = 0.01 -> 10*log10(1/0.01) = 20 dB
        assert abs(psnr(a, a + 0.1) - 20.0) < 1e-12
        # mse = 0.25 -> ~6.0206 dB
        assert abs(psnr(a, a + 0.5) - 10 * np.log10(4.0)) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((3, 9, 9)), rng.random((3, 9, 9))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            psnr(np.zeros((3, 8, 8)), np.zeros((3, 8, 9)))


class TestSsim:
    def test_identity_is_one(self):
        a = np.random.default_rng(2).random((3, 16, 16))
        assert abs(ssim(a, a) - 1.0) < 1e-12

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(3)
        for trial in range(5):
            a = rng.random((3, 15, 18))
            b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
            assert abs(ssim(a, b) - ssim_naive(a.mean(axis=0),
                                               b.mean(axis=0))) < 1e-6

    def test_grayscale_input_accepted(self):
        rng = np.random.default_rng(4)
        a, b = rng.random((14, 14)), rng.random((14, 14))
        assert abs(ssim(a, b) - ssim_naive(a, b)) < 1e-6

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="smaller"):
            ssim(np.zeros((3, 10, 30)), np.zeros((3, 10, 30)))

    def test_degrades_with_noise(self):
        rng = np.random.default_rng(5)
        a = rng.random((3, 24, 24))
        small = ssim(a, np.clip(a + 0.02 * rng.standard_normal(a.shape), 0, 1))
        large = ssim(a, np.clip(a + 0.3 * rng.standard_normal(a.shape), 0, 1))
        assert large < small < 1.0


class TestReport:
    def test_round_trip_with_mean_row(self, tmp_path):
        path = str(tmp_path / "r.tsv")
        rows = [("a.png", 30.0, 0.9), ("b.png", 32.0, 0.95)]
        write_report(path, rows)
        back = read_report(path)
        assert back[0] == ("a.png", 30.0, 0.9)
        assert back[-1] == ("mean", 31.0, 0.925)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no rows"):
            write_report(str(tmp_path / "r.tsv"), [])

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "r.tsv"
        path.write_text("foo\tbar\n")
        with pytest.raises(ValueError, match="header"):
            read_report(str(path))
