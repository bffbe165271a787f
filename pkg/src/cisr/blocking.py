"""Binary detection of blocking artefacts on the codec's block grid.

A pixel is flagged (value 0) when it sits next to a block-grid line whose
cross-boundary jump is large both relative to the local in-block gradient
and in absolute terms. The map gates the non-local operator's candidates
and is treated as a constant during backpropagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ALPHA = 2.0
DEFAULT_TAU = 2.0 / 255.0


@dataclass
class BlockingMap:
    values: np.ndarray            # (H, W) uint8 in {0, 1}
    block_size: int = 8


def _mark_axis(gray: np.ndarray, block_size: int, alpha: float, tau: float,
               mask: np.ndarray) -> None:
    """Flag pixels adjacent to horizontal grid lines; gray is (H, W)."""
    H = gray.shape[0]
    diffs = np.abs(np.diff(gray, axis=0))          # diffs[i] = |g[i+1] - g[i]|
    for r in range(block_size, H, block_size):
        boundary = diffs[r - 1]
        lo = max(0, r - block_size)
        hi = min(H - 1, r + block_size - 1)
        idx = [i for i in range(lo, hi) if i != r - 1]
        local = diffs[idx].mean(axis=0) if idx else np.zeros_like(boundary)
        hit = boundary > np.maximum(alpha * local, tau)
        mask[r - 1][hit] = 0
        mask[r][hit] = 0


def detect_blocking(z: np.ndarray, block_size: int = 8,
                    alpha: float = DEFAULT_ALPHA,
                    tau: float = DEFAULT_TAU) -> BlockingMap:
    """Compute the 0/1 blocking map of a single (C, H, W) or (H, W) image."""
    if block_size < 2:
        raise ValueError(f"block_size must be >= 2, got {block_size}")
    a = np.asarray(z, dtype=np.float64)
    gray = a.mean(axis=0) if a.ndim == 3 else a
    mask = np.ones(gray.shape, dtype=np.uint8)
    _mark_axis(gray, block_size, alpha, tau, mask)
    mask_t = np.ascontiguousarray(mask.T)
    _mark_axis(gray.T, block_size, alpha, tau, mask_t)
    return BlockingMap(values=np.minimum(mask, mask_t.T), block_size=block_size)


def detect_blocking_batch(z: np.ndarray, block_size: int = 8,
                          alpha: float = DEFAULT_ALPHA,
                          tau: float = DEFAULT_TAU) -> np.ndarray:
    """(B, C, H, W) -> (B, 1, H, W) float map of {0, 1}."""
    maps = [detect_blocking(img, block_size, alpha, tau).values
            for img in z]
    return np.stack(maps)[:, None].astype(z.dtype)
