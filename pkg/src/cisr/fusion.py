"""Adaptive convex combination for the long skip connection.

A light two-layer network predicts one weight map per source image; a
per-pixel softmax makes the maps a partition of unity, so the fused
pass-by image is a convex combination of its sources.
"""

from __future__ import annotations

import numpy as np

from .params import Conv, ParameterSet
from .tensor import (Tensor, concat_channels, narrow_channels, relu,
                     softmax_over_channels)


class FusionNet:
    """1x1 conv to 64, ReLU, 1x1 conv to n_sources, per-pixel softmax."""

    def __init__(self, pset: ParameterSet, prefix: str, n_sources: int,
                 colors: int, rng: np.random.Generator, width: int = 64):
        self.n_sources = n_sources
        self.conv1 = Conv(pset, prefix + "conv1", n_sources * colors, width, 1, rng)
        self.conv2 = Conv(pset, prefix + "conv2", width, n_sources, 1, rng)

    def estimate_weights(self, sources: list[Tensor]) -> Tensor:
        """(B, n_sources, H, W) maps summing to 1 at every pixel."""
        if len(sources) != self.n_sources:
            raise ValueError(
                f"expected {self.n_sources} sources, got {len(sources)}")
        logits = self.conv2(relu(self.conv1(concat_channels(sources))))
        return softmax_over_channels(logits)


def fuse(sources: list[Tensor], weights: Tensor) -> Tensor:
    """Pixel-wise convex combination; each single-channel weight map
    broadcasts across the color channels of its source."""
    if weights.shape[1] != len(sources):
        raise ValueError(
            f"{weights.shape[1]} weight maps for {len(sources)} sources")
    out = None
    for i, src in enumerate(sources):
        term = src * narrow_channels(weights, i, 1)
        out = term if out is None else out + term
    return out
