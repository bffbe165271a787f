"""Assembly of the artefacts-removal module (ARM) and the
resolution-enhancement module (REM).

Both share one layout: modified non-local front end, adaptive skip
fusion, and a residual-group backbone with channel attention. The ARM
receives the high-resolution auxiliary input as space-to-depth copies and
emits a low-resolution estimate; the REM ends in a pixel-shuffle
upsampling tail plus a bicubic long skip.
"""

from __future__ import annotations

import math

import numpy as np

from .blocking import detect_blocking_batch
from .config import BackboneConfig, ModelConfig, ModuleSpec
from .fusion import FusionNet, fuse
from .nonlocal_op import BandwidthNet, nonlocal_filter
from .params import Conv, ParameterSet
from .tensor import (Tensor, bicubic_resize, concat_channels, gather_channels,
                     global_avg_pool, pixel_shuffle, relu, sigmoid,
                     space_to_depth)

COLORS = 3


def select_registered_copy(s: int) -> int:
    """1-indexed space-to-depth copy best aligned with the LR grid:
    round-half-up of (s^2 + 1) / 2."""
    return int(math.floor((s * s + 1) / 2 + 0.5))


class ChannelAttentionBlock:
    def __init__(self, pset: ParameterSet, prefix: str, cfg: BackboneConfig,
                 rng: np.random.Generator):
        c, r = cfg.n_channels, cfg.reduction
        self.conv1 = Conv(pset, prefix + "conv1", c, c, 3, rng)
        self.conv2 = Conv(pset, prefix + "conv2", c, c, 3, rng)
        self.squeeze = Conv(pset, prefix + "squeeze", c, c // r, 1, rng)
        self.excite = Conv(pset, prefix + "excite", c // r, c, 1, rng)

    def __call__(self, x: Tensor, pad_mode: str) -> Tensor:
        body = self.conv2(relu(self.conv1(x, pad_mode)), pad_mode)
        attn = sigmoid(self.excite(relu(self.squeeze(global_avg_pool(body)))))
        return x + body * attn


class ResidualGroup:
    def __init__(self, pset: ParameterSet, prefix: str, cfg: BackboneConfig,
                 rng: np.random.Generator):
        self.blocks = [ChannelAttentionBlock(pset, f"{prefix}block{i}.", cfg, rng)
                       for i in range(cfg.n_blocks_per_group)]
        self.conv = Conv(pset, prefix + "conv", cfg.n_channels,
                         cfg.n_channels, 3, rng)

    def __call__(self, x: Tensor, pad_mode: str) -> Tensor:
        y = x
        for block in self.blocks:
            y = block(y, pad_mode)
        return x + self.conv(y, pad_mode)


class Backbone:
    """Head conv, residual groups with a long body residual, and a final
    conv initialized to zero so the module starts as its skip connection."""

    def __init__(self, pset: ParameterSet, prefix: str, in_ch: int,
                 out_ch: int, cfg: BackboneConfig, rng: np.random.Generator):
        self.head = Conv(pset, prefix + "head", in_ch, cfg.n_channels, 3, rng)
        self.groups = [ResidualGroup(pset, f"{prefix}group{i}.", cfg, rng)
                       for i in range(cfg.n_groups)]
        self.body = Conv(pset, prefix + "body", cfg.n_channels,
                         cfg.n_channels, 3, rng)
        self.out = Conv(pset, prefix + "out", cfg.n_channels, out_ch, 3, rng,
                        zero_init=True)

    def __call__(self, x: Tensor, pad_mode: str) -> Tensor:
        f = self.head(x, pad_mode)
        y = f
        for group in self.groups:
            y = group(y, pad_mode)
        return self.out(f + self.body(y, pad_mode), pad_mode)


def backbone_parameter_count(in_ch: int, out_ch: int, cfg: BackboneConfig) -> int:
    """Closed-form learnable-value count of one Backbone."""
    c, r = cfg.n_channels, cfg.reduction
    conv = lambda ci, co, k: ci * co * k * k + co
    block = (conv(c, c, 3) * 2 + conv(c, c // r, 1) + conv(c // r, c, 1))
    group = block * cfg.n_blocks_per_group + conv(c, c, 3)
    return (conv(in_ch, c, 3) + group * cfg.n_groups + conv(c, c, 3)
            + conv(c, out_ch, 3))


class _RestorationNet:
    """Shared machinery of the ARM and the REM."""

    def __init__(self, pset: ParameterSet, prefix: str, spec: ModuleSpec,
                 model_cfg: ModelConfig, rng: np.random.Generator):
        self.spec = spec
        self.model_cfg = model_cfg
        self.n_sources = 2 if spec.disable_nonlocal else 3
        self.hnet = None
        if not spec.disable_nonlocal and spec.fixed_h is None:
            self.hnet = BandwidthNet(pset, prefix + "hnet.", COLORS, rng)
        self.fusion = None
        if spec.skip_mode == "adaptive":
            self.fusion = FusionNet(pset, prefix + "fusion.", self.n_sources,
                                    COLORS, rng)

    def _blocking_map(self, z: Tensor) -> np.ndarray:
        cfg = self.model_cfg
        return detect_blocking_batch(z.data, cfg.block_size,
                                     cfg.blocking_alpha, cfg.blocking_tau)

    def _sources(self, z: Tensor, g: Tensor, pad_mode: str,
                 debug: dict | None) -> list[Tensor]:
        if self.spec.disable_nonlocal:
            return [z, g]
        if self.hnet is not None:
            h = self.hnet(g, self.spec.nonlocal_cfg.epsilon_h, pad_mode)
        else:
            h = Tensor(np.full((z.shape[0], 1, z.shape[2], z.shape[3]),
                               self.spec.fixed_h, dtype=z.data.dtype))
        d = self._blocking_map(z)
        u = nonlocal_filter(z, g, d, h, self.spec.nonlocal_cfg,
                            wrap=(pad_mode == "circular"))
        if debug is not None:
            debug["h"] = h.data.copy()
            debug["d"] = d.copy()
            debug["u"] = u.data.copy()
        return [z, g, u]

    def _skip(self, sources: list[Tensor], debug: dict | None) -> Tensor | None:
        mode = self.spec.skip_mode
        if mode == "none":
            return None
        if mode == "adaptive":
            weights = self.fusion.estimate_weights(sources)
            if debug is not None:
                debug["t"] = weights.data.copy()
            return fuse(sources, weights)
        index = {"z_only": 0, "g_only": 1, "u_only": 2}[mode]
        return sources[index]


class ArmNet(_RestorationNet):
    """P: (HR estimate, compressed LR) -> clean LR estimate."""

    def __init__(self, pset, prefix, spec: ModuleSpec, model_cfg: ModelConfig,
                 rng):
        super().__init__(pset, prefix + "arm.", spec, model_cfg, rng)
        s = spec.scale
        self.k_copy = select_registered_copy(s)
        in_ch = COLORS * self.n_sources + COLORS * (s * s - 1)
        self.backbone = Backbone(pset, prefix + "arm.backbone.", in_ch,
                                 COLORS, spec.backbone, rng)

    def forward(self, x_hat: Tensor, z: Tensor, pad_mode: str = "zeros",
                debug: dict | None = None) -> Tensor:
        s = self.spec.scale
        B, C, H, W = z.shape
        if x_hat.shape != (B, C, s * H, s * W):
            raise ValueError(
                f"ARM expects HR input {(B, C, s * H, s * W)}, got {x_hat.shape}")
        copies = space_to_depth(x_hat, s)
        k0 = self.k_copy - 1
        g = gather_channels(copies, [c * s * s + k0 for c in range(C)])
        rest_idx = [c * s * s + i for i in range(s * s) if i != k0
                    for c in range(C)]
        rest = gather_channels(copies, rest_idx)
        sources = self._sources(z, g, pad_mode, debug)
        v = self._skip(sources, debug)
        body_in = concat_channels(sources + [rest])
        out = self.backbone(body_in, pad_mode)
        return out if v is None else out + v


class RemNet(_RestorationNet):
    """R: (clean LR estimate, compressed LR) -> HR estimate."""

    def __init__(self, pset, prefix, spec: ModuleSpec, model_cfg: ModelConfig,
                 rng):
        super().__init__(pset, prefix + "rem.", spec, model_cfg, rng)
        s = spec.scale
        in_ch = COLORS * self.n_sources
        self.backbone = Backbone(pset, prefix + "rem.backbone.", in_ch,
                                 COLORS * s * s, spec.backbone, rng)

    def forward(self, y_hat: Tensor, z: Tensor, pad_mode: str = "zeros",
                debug: dict | None = None) -> Tensor:
        if y_hat.shape != z.shape:
            raise ValueError(
                f"REM expects matching LR inputs, got {y_hat.shape} vs {z.shape}")
        s = self.spec.scale
        g = y_hat
        sources = self._sources(z, g, pad_mode, debug)
        v = self._skip(sources, debug)
        out = pixel_shuffle(self.backbone(concat_channels(sources), pad_mode), s)
        if v is None:
            return out
        return out + bicubic_resize(v, s, wrap=(pad_mode == "circular"))


class Model:
    """The full unfolding model: parameter sets plus per-iteration nets."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.params_arm = ParameterSet()
        self.params_rem = ParameterSet()
        n_inst = 1 if cfg.share_params else cfg.iterations
        if cfg.topology != "parallel_series":
            n_inst = 1
        self.arms = [ArmNet(self.params_arm, f"it{j}." if n_inst > 1 else "",
                            cfg.arm, cfg, rng) for j in range(n_inst)]
        self.rems = [RemNet(self.params_rem, f"it{j}." if n_inst > 1 else "",
                            cfg.rem, cfg, rng) for j in range(n_inst)]
        self.fusion_conv = None
        if cfg.topology == "parallel_fusion":
            # 3x3 conv merging [bicubic(ARM out), REM out] into RGB
            self.fusion_conv = Conv(self.params_rem, "topology_fusion",
                                    2 * COLORS, COLORS, 3, rng)

    def arm_at(self, j: int) -> ArmNet:
        return self.arms[0] if len(self.arms) == 1 else self.arms[j]

    def rem_at(self, j: int) -> RemNet:
        return self.rems[0] if len(self.rems) == 1 else self.rems[j]

    def parameter_count(self) -> int:
        return self.params_arm.num_values() + self.params_rem.num_values()
