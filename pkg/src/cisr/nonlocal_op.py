"""Modified non-local operator.

Candidate weights come from patch similarity on the auxiliary image g,
scaled by a learned per-pixel bandwidth map h; candidates flagged by the
blocking map are excluded; values are drawn from the unprocessed input z.
The self candidate is always kept so every weight row normalizes cleanly.

Implemented as one autodiff primitive: the forward loops over window
offsets with vectorized patch-distance box sums, and the backward
propagates through z, g and h (the blocking map is a constant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import Conv, ParameterSet
from .tensor import Tensor, _result, relu


@dataclass
class NonLocalConfig:
    patch_radius: int = 2         # similarity patch is (2r+1)^2
    window_radius: int = 10       # search window is (2w+1)^2
    epsilon_h: float = 1e-2       # floor keeping the bandwidth positive

    def __post_init__(self):
        if self.patch_radius < 0 or self.window_radius < 0:
            raise ValueError("patch_radius and window_radius must be >= 0")
        if self.epsilon_h <= 0:
            raise ValueError("epsilon_h must be positive")


class BandwidthNet:
    """Two-layer network estimating the bandwidth map h from g.

    3x3 conv to 64 channels, ReLU, 1x1 conv to one channel; the output is
    made strictly positive by |.| + epsilon.
    """

    def __init__(self, pset: ParameterSet, prefix: str, in_ch: int,
                 rng: np.random.Generator, width: int = 64):
        self.conv1 = Conv(pset, prefix + "conv1", in_ch, width, 3, rng)
        self.conv2 = Conv(pset, prefix + "conv2", width, 1, 1, rng)

    def __call__(self, g: Tensor, epsilon_h: float,
                 pad_mode: str = "zeros") -> Tensor:
        raw = self.conv2(relu(self.conv1(g, pad_mode)), pad_mode)
        return raw.abs() + epsilon_h


def _pad_hw(a: np.ndarray, r: int, wrap: bool) -> np.ndarray:
    if r == 0:
        return a
    widths = ((0, 0), (0, 0), (r, r), (r, r))
    return np.pad(a, widths, mode="wrap" if wrap else "edge")


def _fold_pad_grad(gp: np.ndarray, r: int, wrap: bool) -> np.ndarray:
    """Adjoint of edge/wrap padding on the last two axes."""
    if r == 0:
        return gp
    g = gp[:, :, r:-r, :].copy()
    top, bottom = gp[:, :, :r, :], gp[:, :, -r:, :]
    if wrap:
        g[:, :, -r:, :] += top
        g[:, :, :r, :] += bottom
    else:
        g[:, :, 0, :] += top.sum(axis=2)
        g[:, :, -1, :] += bottom.sum(axis=2)
    out = g[:, :, :, r:-r].copy()
    left, right = g[:, :, :, :r], g[:, :, :, -r:]
    if wrap:
        out[:, :, :, -r:] += left
        out[:, :, :, :r] += right
    else:
        out[:, :, :, 0] += left.sum(axis=3)
        out[:, :, :, -1] += right.sum(axis=3)
    return out


def _box_sum_valid(a: np.ndarray, k: int) -> np.ndarray:
    """Sum over every k*k window of the last two axes, valid placement."""
    if k == 1:
        return a
    c = np.cumsum(np.cumsum(a, axis=-2), axis=-1)
    c = np.pad(c, [(0, 0)] * (a.ndim - 2) + [(1, 0), (1, 0)])
    return (c[..., k:, k:] - c[..., :-k, k:]
            - c[..., k:, :-k] + c[..., :-k, :-k])


def _box_scatter(gdist: np.ndarray, k: int) -> np.ndarray:
    """Adjoint of _box_sum_valid: spread each window sum back over k*k."""
    B, C, Mh, Mw = gdist.shape
    out = np.zeros((B, C, Mh + k - 1, Mw + k - 1), dtype=gdist.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + Mh, j:j + Mw] += gdist
    return out


def nonlocal_filter(z: Tensor, g: Tensor, d: np.ndarray, h: Tensor,
                    cfg: NonLocalConfig, wrap: bool = False) -> Tensor:
    """Weighted window average of z with similarity weights from g and h.

    d is a (B, 1, H, W) array of {0, 1}; flagged candidates get exactly
    zero weight. Differentiable with respect to z, g and h; with
    wrap=True all sampling is periodic (torus) instead of edge-clamped.
    """
    if z.shape != g.shape:
        raise ValueError(f"z and g shapes differ: {z.shape} vs {g.shape}")
    B, C, H, W = z.shape
    if h.shape != (B, 1, H, W) or d.shape != (B, 1, H, W):
        raise ValueError(
            f"h {h.shape} and d {d.shape} must be (B, 1, H, W) = {(B, 1, H, W)}")
    r, wr = cfg.patch_radius, cfg.window_radius
    k = 2 * r + 1
    zd, gd, hd = z.data, g.data, h.data
    dd = np.asarray(d, dtype=np.float64)
    gd64 = gd.astype(np.float64)
    gp = _pad_hw(gd64, r, wrap=False)    # edge-clamped patches (clamp mode)
    h2 = hd.astype(np.float64) ** 2

    need_grad = z.requires_grad or g.requires_grad or h.requires_grad
    num = np.zeros((B, C, H, W), dtype=np.float64)
    den = np.zeros((B, 1, H, W), dtype=np.float64)
    saved: dict[tuple[int, int], tuple] = {}

    def valid_slices(dy, dx):
        if wrap:
            return slice(0, H), slice(0, W)
        return (slice(max(0, -dy), H - max(0, dy)),
                slice(max(0, -dx), W - max(0, dx)))

    def shifted(a, dy, dx, rows, cols):
        """a at candidate positions m + (dy, dx) for valid m."""
        if wrap:
            return np.roll(a, (-dy, -dx), axis=(-2, -1))
        return a[..., slice(rows.start + dy, rows.stop + dy),
                 slice(cols.start + dx, cols.stop + dx)]

    def patch_diff(dy, dx, rows, cols):
        """Pointwise difference g(q) - g(q + o) over the patch support."""
        if wrap:
            return gd64 - np.roll(gd64, (-dy, -dx), axis=(2, 3))
        return (gp[:, :, rows.start:rows.stop + 2 * r,
                   cols.start:cols.stop + 2 * r]
                - gp[:, :, rows.start + dy:rows.stop + dy + 2 * r,
                     cols.start + dx:cols.stop + dx + 2 * r])

    for dy in range(-wr, wr + 1):
        for dx in range(-wr, wr + 1):
            rows, cols = valid_slices(dy, dx)
            if rows.start >= rows.stop or cols.start >= cols.stop:
                continue
            if dy == 0 and dx == 0:
                # self candidate: distance 0, blocking flag ignored
                w_raw = np.ones((B, 1, rows.stop - rows.start,
                                 cols.stop - cols.start))
                dist = None
            else:
                diff = patch_diff(dy, dx, rows, cols)
                F = (diff * diff).sum(axis=1, keepdims=True)
                if wrap:
                    F = _pad_hw(F, r, wrap=True)
                dist = _box_sum_valid(F, k)
                w_raw = np.exp(-dist / h2[:, :, rows, cols])
                w_raw = w_raw * shifted(dd, dy, dx, rows, cols)
            zc = shifted(zd, dy, dx, rows, cols).astype(np.float64)
            num[:, :, rows, cols] += w_raw * zc
            den[:, :, rows, cols] += w_raw
            if need_grad:
                saved[(dy, dx)] = (w_raw, dist, rows, cols)

    u = num / den
    out = _result(u.astype(zd.dtype), (z, g, h))
    if not out.requires_grad:
        return out

    def backward(gout):
        gu = gout.astype(np.float64)
        gz = np.zeros_like(zd, dtype=np.float64) if z.requires_grad else None
        if g.requires_grad:
            gg = np.zeros_like(gd64) if wrap else np.zeros_like(gp)
        gh = np.zeros_like(hd, dtype=np.float64) if h.requires_grad else None
        h3 = h2 * np.sqrt(h2)
        for (dy, dx), (w_raw, dist, rows, cols) in saved.items():
            wn = w_raw / den[:, :, rows, cols]
            if z.requires_grad:
                contrib = gu[:, :, rows, cols] * wn
                if wrap:
                    gz += np.roll(contrib, (dy, dx), axis=(2, 3))
                else:
                    gz[:, :, slice(rows.start + dy, rows.stop + dy),
                       slice(cols.start + dx, cols.stop + dx)] += contrib
            if dy == 0 and dx == 0:
                continue      # self weight is the constant 1
            if not (g.requires_grad or h.requires_grad):
                continue
            zc = shifted(zd, dy, dx, rows, cols).astype(np.float64)
            gw = (gu[:, :, rows, cols]
                  * (zc - u[:, :, rows, cols])).sum(axis=1, keepdims=True)
            gw /= den[:, :, rows, cols]
            if h.requires_grad:
                gh[:, :, rows, cols] += gw * w_raw * 2.0 * dist / h3[:, :, rows, cols]
            if g.requires_grad:
                gdist = gw * w_raw * (-1.0 / h2[:, :, rows, cols])
                gF = _box_scatter(gdist, k)
                diff = patch_diff(dy, dx, rows, cols)
                if wrap:
                    gdiff = 2.0 * diff * _fold_pad_grad(gF, r, wrap=True)
                    gg += gdiff
                    gg -= np.roll(gdiff, (dy, dx), axis=(2, 3))
                else:
                    gdiff = 2.0 * diff * gF
                    gg[:, :, rows.start:rows.stop + 2 * r,
                       cols.start:cols.stop + 2 * r] += gdiff
                    gg[:, :, rows.start + dy:rows.stop + dy + 2 * r,
                       cols.start + dx:cols.stop + dx + 2 * r] -= gdiff
        if z.requires_grad:
            z._accumulate(gz.astype(zd.dtype))
        if g.requires_grad:
            total = gg if wrap else _fold_pad_grad(gg, r, wrap=False)
            g._accumulate(total.astype(gd.dtype))
        if h.requires_grad:
            h._accumulate(gh.astype(hd.dtype))

    out._backward = backward
    return out
