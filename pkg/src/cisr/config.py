"""Model and training configuration with a canonical key-value text form.

The text form is what config files and checkpoints carry: one `key = value`
per line in a fixed key order, so identical configurations serialize to
identical bytes. Parsing is strict: unknown or missing keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .blocking import DEFAULT_ALPHA, DEFAULT_TAU
from .nonlocal_op import NonLocalConfig

TOPOLOGIES = ("parallel_series", "arm_then_rem", "rem_then_arm",
              "parallel_fusion")
SKIP_MODES = ("adaptive", "z_only", "g_only", "u_only", "none")


class ConfigError(ValueError):
    pass


@dataclass
class BackboneConfig:
    n_groups: int
    n_blocks_per_group: int
    n_channels: int = 64
    reduction: int = 16

    def __post_init__(self):
        if min(self.n_groups, self.n_blocks_per_group, self.n_channels,
               self.reduction) < 1:
            raise ConfigError("backbone sizes must be positive")
        if self.n_channels % self.reduction:
            raise ConfigError(
                f"reduction {self.reduction} must divide n_channels {self.n_channels}")


@dataclass
class ModuleSpec:
    kind: str                     # "arm" or "rem"
    scale: int
    backbone: BackboneConfig
    nonlocal_cfg: NonLocalConfig = field(default_factory=NonLocalConfig)
    disable_nonlocal: bool = False
    fixed_h: float | None = None  # constant bandwidth instead of the learned map
    skip_mode: str = "adaptive"

    def __post_init__(self):
        if self.kind not in ("arm", "rem"):
            raise ConfigError(f"kind must be arm or rem, got {self.kind!r}")
        if self.scale not in (2, 3, 4):
            raise ConfigError(f"scale must be in {{2, 3, 4}}, got {self.scale}")
        if self.skip_mode not in SKIP_MODES:
            raise ConfigError(f"unknown skip_mode {self.skip_mode!r}")
        if self.disable_nonlocal and self.skip_mode == "u_only":
            raise ConfigError("u_only skip needs the non-local operator")


def default_rho(j: int) -> list[float]:
    """Non-decreasing per-iteration loss weights: the two published
    schedules, else a linear ramp from 1/J to 1."""
    if j == 3:
        return [0.3, 0.6, 1.0]
    if j == 5:
        return [0.2, 0.4, 0.6, 0.8, 1.0]
    return [(i + 1) / j for i in range(j)]


@dataclass
class ModelConfig:
    scale: int = 2
    iterations: int = 5                          # J
    rho: list[float] = None
    gamma: float = 1.0
    arm: ModuleSpec = None
    rem: ModuleSpec = None
    share_params: bool = True
    topology: str = "parallel_series"
    truncate_unroll: bool = True
    seed: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    n_patches: int = 32
    patch_size: int = 48                         # LR-side crop
    max_steps: int = 2000
    val_interval: int = 200
    patience: int = 5
    block_size: int = 8                          # codec grid for d(.)
    blocking_alpha: float = DEFAULT_ALPHA
    blocking_tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.scale not in (2, 3, 4):
            raise ConfigError(f"scale must be in {{2, 3, 4}}, got {self.scale}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.rho is None:
            self.rho = default_rho(self.iterations)
        if len(self.rho) != self.iterations:
            raise ConfigError(
                f"rho has {len(self.rho)} entries for J = {self.iterations}")
        if any(b < a for a, b in zip(self.rho, self.rho[1:])):
            raise ConfigError("rho must be non-decreasing")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.arm is None:
            self.arm = ModuleSpec("arm", self.scale, BackboneConfig(2, 12))
        if self.rem is None:
            self.rem = ModuleSpec("rem", self.scale, BackboneConfig(2, 12))
        for spec, kind in ((self.arm, "arm"), (self.rem, "rem")):
            if spec.kind != kind or spec.scale != self.scale:
                raise ConfigError(f"{kind} ModuleSpec kind/scale inconsistent")


def tiny_config(scale: int = 2, **overrides) -> ModelConfig:
    """2 residual groups of 12 attention blocks per module, J = 5."""
    cfg = dict(
        scale=scale, iterations=5,
        arm=ModuleSpec("arm", scale, BackboneConfig(2, 12)),
        rem=ModuleSpec("rem", scale, BackboneConfig(2, 12)),
    )
    cfg.update(overrides)
    return ModelConfig(**cfg)


def full_config(scale: int = 2, **overrides) -> ModelConfig:
    """5 residual groups of 12 attention blocks per module, J = 3."""
    cfg = dict(
        scale=scale, iterations=3,
        arm=ModuleSpec("arm", scale, BackboneConfig(5, 12)),
        rem=ModuleSpec("rem", scale, BackboneConfig(5, 12)),
    )
    cfg.update(overrides)
    return ModelConfig(**cfg)


def toy_config(scale: int = 2, **overrides) -> ModelConfig:
    """Desk-scale smoke-test model: 1 group of 2 blocks, 16 channels, J = 2."""
    bb = BackboneConfig(1, 2, n_channels=16, reduction=4)
    nl = NonLocalConfig(patch_radius=2, window_radius=6)
    cfg = dict(
        scale=scale, iterations=2,
        arm=ModuleSpec("arm", scale, bb, nonlocal_cfg=nl),
        rem=ModuleSpec("rem", scale, BackboneConfig(1, 2, 16, 4), nonlocal_cfg=nl),
        n_patches=1, patch_size=64, lr=1e-3,
    )
    cfg.update(overrides)
    return ModelConfig(**cfg)


# -- canonical text form ----------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ",".join(repr(float(x)) for x in v)
    return str(v)


_TOP_FIELDS = [
    ("scale", int), ("iterations", int), ("rho", "floats"), ("gamma", float),
    ("share_params", bool), ("topology", str), ("truncate_unroll", bool),
    ("seed", int), ("lr", float), ("beta1", float), ("beta2", float),
    ("eps", float), ("n_patches", int), ("patch_size", int),
    ("max_steps", int), ("val_interval", int), ("patience", int),
    ("block_size", int), ("blocking_alpha", float), ("blocking_tau", float),
]

_MODULE_FIELDS = [
    ("backbone.n_groups", int), ("backbone.n_blocks_per_group", int),
    ("backbone.n_channels", int), ("backbone.reduction", int),
    ("nonlocal.patch_radius", int), ("nonlocal.window_radius", int),
    ("nonlocal.epsilon_h", float), ("disable_nonlocal", bool),
    ("fixed_h", "optional_float"), ("skip_mode", str),
]


def _module_values(spec: ModuleSpec) -> dict:
    return {
        "backbone.n_groups": spec.backbone.n_groups,
        "backbone.n_blocks_per_group": spec.backbone.n_blocks_per_group,
        "backbone.n_channels": spec.backbone.n_channels,
        "backbone.reduction": spec.backbone.reduction,
        "nonlocal.patch_radius": spec.nonlocal_cfg.patch_radius,
        "nonlocal.window_radius": spec.nonlocal_cfg.window_radius,
        "nonlocal.epsilon_h": spec.nonlocal_cfg.epsilon_h,
        "disable_nonlocal": spec.disable_nonlocal,
        "fixed_h": spec.fixed_h,
        "skip_mode": spec.skip_mode,
    }


def config_to_text(cfg: ModelConfig) -> str:
    lines = []
    for key, _ in _TOP_FIELDS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    for prefix, spec in (("arm", cfg.arm), ("rem", cfg.rem)):
        vals = _module_values(spec)
        for key, _ in _MODULE_FIELDS:
            lines.append(f"{prefix}.{key} = {_fmt(vals[key])}")
    return "\n".join(lines) + "\n"


def _parse_value(raw: str, kind):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return raw == "true"
        if kind == "floats":
            return [float(x) for x in raw.split(",") if x.strip()]
        if kind == "optional_float":
            return None if raw == "none" else float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(str(e)) from None


def config_from_text(text: str) -> ModelConfig:
    known = {key: kind for key, kind in _TOP_FIELDS}
    for prefix in ("arm", "rem"):
        for key, kind in _MODULE_FIELDS:
            known[f"{prefix}.{key}"] = kind
    values = {}
    for ln, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {ln}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        values[key] = _parse_value(raw, known[key])
    missing = sorted(set(known) - set(values))
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing[:5])}")

    scale = values["scale"]

    def module(prefix, kind):
        v = {k: values[f"{prefix}.{k}"] for k, _ in _MODULE_FIELDS}
        return ModuleSpec(
            kind=kind, scale=scale,
            backbone=BackboneConfig(
                v["backbone.n_groups"], v["backbone.n_blocks_per_group"],
                v["backbone.n_channels"], v["backbone.reduction"]),
            nonlocal_cfg=NonLocalConfig(
                v["nonlocal.patch_radius"], v["nonlocal.window_radius"],
                v["nonlocal.epsilon_h"]),
            disable_nonlocal=v["disable_nonlocal"],
            fixed_h=v["fixed_h"], skip_mode=v["skip_mode"])

    kwargs = {key: values[key] for key, _ in _TOP_FIELDS}
    return ModelConfig(arm=module("arm", "arm"), rem=module("rem", "rem"),
                       **kwargs)


def load_config(path: str) -> ModelConfig:
    with open(path) as f:
        return config_from_text(f.read())
