"""Image-quality metrics (PSNR, SSIM) and tab-separated evaluation reports.

Both metrics take (C, H, W) float arrays with intensities in [0, 1];
SSIM operates on the channel-mean grayscale image.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_C1 = 0.01 ** 2
_C2 = 0.03 ** 2


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for a peak of 1, capped at 99."""
    _check_pair(a, b)
    mse = float(np.mean((np.asarray(a, dtype=np.float64)
                         - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int = SSIM_WINDOW,
                     sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _gray(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 3:
        return a.mean(axis=0)
    if a.ndim == 2:
        return a
    raise ValueError(f"expected (C, H, W) or (H, W), got shape {a.shape}")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows."""
    _check_pair(np.asarray(a), np.asarray(b))
    ga, gb = _gray(a), _gray(b)
    if min(ga.shape) < SSIM_WINDOW:
        raise ValueError(
            f"image {ga.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    w = _gaussian_window()
    wa = sliding_window_view(ga, (SSIM_WINDOW, SSIM_WINDOW))
    wb = sliding_window_view(gb, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = np.einsum("ijkl,kl->ij", wa, w)
    mu_b = np.einsum("ijkl,kl->ij", wb, w)
    e_aa = np.einsum("ijkl,kl->ij", wa * wa, w)
    e_bb = np.einsum("ijkl,kl->ij", wb * wb, w)
    e_ab = np.einsum("ijkl,kl->ij", wa * wb, w)
    var_a = e_aa - mu_a ** 2
    var_b = e_bb - mu_b ** 2
    cov = e_ab - mu_a * mu_b
    num = (2 * mu_a * mu_b + _C1) * (2 * cov + _C2)
    den = (mu_a ** 2 + mu_b ** 2 + _C1) * (var_a + var_b + _C2)
    return float(np.mean(num / den))


REPORT_COLUMNS = ("name", "psnr", "ssim")


def write_report(path: str, rows: list[tuple[str, float, float]]):
    """Write a TSV of per-image scores with a trailing mean row."""
    if not rows:
        raise ValueError("no rows to report")
    with open(path, "w") as f:
        f.write("\t".join(REPORT_COLUMNS) + "\n")
        for name, p, s in rows:
            f.write(f"{name}\t{p:.4f}\t{s:.4f}\n")
        mp = sum(r[1] for r in rows) / len(rows)
        ms = sum(r[2] for r in rows) / len(rows)
        f.write(f"mean\t{mp:.4f}\t{ms:.4f}\n")


def read_report(path: str) -> list[tuple[str, float, float]]:
    """Parse a report written by write_report, including the mean row."""
    rows = []
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report header {header!r}")
        for line in f:
            name, p, s = line.rstrip("\n").split("\t")
            rows.append((name, float(p), float(s)))
    return rows
