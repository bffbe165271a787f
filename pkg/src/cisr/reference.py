"""Independent brute-force reference implementations.

Everything here is written as plain loops over definitions, deliberately
sharing no code path with the fast implementations it checks. Used by the
test suite and the `selftest` command.
"""

from __future__ import annotations

import math

import numpy as np


def conv2d_naive(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
                 stride: int = 1, padding: int = 0) -> np.ndarray:
    """Six-nested-loop cross-correlation, zero padding."""
    B, C, H, W = x.shape
    O, _, kH, kW = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    Ho = (H + 2 * padding - kH) // stride + 1
    Wo = (W + 2 * padding - kW) // stride + 1
    y = np.zeros((B, O, Ho, Wo), dtype=np.float64)
    for bi in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    acc = 0.0
                    for c in range(C):
                        for u in range(kH):
                            for v in range(kW):
                                acc += xp[bi, c, i * stride + u, j * stride + v] * w[o, c, u, v]
                    y[bi, o, i, j] = acc + (b[o] if b is not None else 0.0)
    return y


def finite_difference_grad(f, x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray,
                  floor: float = 1.0) -> float:
    """max |a - n| / max(floor, |n|) over all entries."""
    denom = np.maximum(floor, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))


def nonlocal_filter_naive(z: np.ndarray, g: np.ndarray, d: np.ndarray,
                          h: np.ndarray, patch_radius: int,
                          window_radius: int) -> np.ndarray:
    """All-pairs non-local weighted average, per definition.

    z, g: (C, H, W); d, h: (H, W). Candidates are window pixels inside the
    image; patch distances use edge-clamped sampling; the self candidate
    is always kept.
    """
    C, H, W = z.shape
    r, wr = patch_radius, window_radius
    out = np.zeros_like(z, dtype=np.float64)

    def patch(img, i, j):
        rows = np.clip(np.arange(i - r, i + r + 1), 0, H - 1)
        cols = np.clip(np.arange(j - r, j + r + 1), 0, W - 1)
        return img[:, rows][:, :, cols]

    for i in range(H):
        for j in range(W):
            pm = patch(g, i, j)
            weights = []
            values = []
            for di in range(-wr, wr + 1):
                for dj in range(-wr, wr + 1):
                    ni, nj = i + di, j + dj
                    if not (0 <= ni < H and 0 <= nj < W):
                        continue
                    pn = patch(g, ni, nj)
                    dist = float(((pm - pn) ** 2).sum())
                    w = math.exp(-dist / float(h[i, j]) ** 2)
                    if (di, dj) != (0, 0):
                        w *= float(d[ni, nj])
                    weights.append(w)
                    values.append(z[:, ni, nj])
            weights = np.asarray(weights)
            weights = weights / weights.sum()
            out[:, i, j] = (weights[:, None] * np.asarray(values)).sum(axis=0)
    return out


def block_codec_naive(block: np.ndarray, table: np.ndarray) -> np.ndarray:
    """One 8x8 block: level shift, DCT, quantize, dequantize, inverse DCT.

    block holds values in [0, 255]; returns the reconstructed block.
    """
    n = 8
    shifted = block.astype(np.float64) - 128.0
    coef = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            cu = math.sqrt(1.0 / n) if u == 0 else math.sqrt(2.0 / n)
            cv = math.sqrt(1.0 / n) if v == 0 else math.sqrt(2.0 / n)
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc += (shifted[i, j]
                            * math.cos((2 * i + 1) * u * math.pi / (2 * n))
                            * math.cos((2 * j + 1) * v * math.pi / (2 * n)))
            coef[u, v] = cu * cv * acc
    q = coef / table
    q = np.sign(q) * np.floor(np.abs(q) + 0.5)     # ties away from zero
    deq = q * table
    rec = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for u in range(n):
                for v in range(n):
                    cu = math.sqrt(1.0 / n) if u == 0 else math.sqrt(2.0 / n)
                    cv = math.sqrt(1.0 / n) if v == 0 else math.sqrt(2.0 / n)
                    acc += (cu * cv * deq[u, v]
                            * math.cos((2 * i + 1) * u * math.pi / (2 * n))
                            * math.cos((2 * j + 1) * v * math.pi / (2 * n)))
            rec[i, j] = acc
    return np.clip(rec + 128.0, 0.0, 255.0)


def ssim_naive(a: np.ndarray, b: np.ndarray) -> float:
    """Sliding 11x11 Gaussian-window SSIM on channel-mean grayscale."""
    ga = a.mean(axis=0) if a.ndim == 3 else a
    gb = b.mean(axis=0) if b.ndim == 3 else b
    H, W = ga.shape
    win = 11
    if H < win or W < win:
        raise ValueError(f"image {H}x{W} smaller than the {win}x{win} window")
    sigma = 1.5
    ax = np.arange(win) - win // 2
    k1 = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    kernel = np.outer(k1, k1)
    kernel /= kernel.sum()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    for i in range(H - win + 1):
        for j in range(W - win + 1):
            pa = ga[i:i + win, j:j + win].astype(np.float64)
            pb = gb[i:i + win, j:j + win].astype(np.float64)
            mu_a = (kernel * pa).sum()
            mu_b = (kernel * pb).sum()
            var_a = (kernel * (pa - mu_a) ** 2).sum()
            var_b = (kernel * (pb - mu_b) ** 2).sum()
            cov = (kernel * (pa - mu_a) * (pb - mu_b)).sum()
            vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                        / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(vals))
