"""Recursive unfolding: J weight-shared iterations of ARM then REM,
curriculum-weighted L1 training, and the series/parallel topology
ablations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .codec import TrainingTriple
from .config import ModelConfig
from .metrics import psnr
from .model import COLORS, Model
from .params import adam_step
from .tensor import (Tensor, bicubic_resize, concat_channels, gather_channels,
                     pixel_shuffle, space_to_depth)


@dataclass
class UnfoldTrace:
    y_hats: list[Tensor]          # \hat{y}_1 .. \hat{y}_J
    x_hats: list[Tensor]          # \hat{x}_0 .. \hat{x}_J


def unfold_infer(z: Tensor, model: Model, pad_mode: str = "zeros",
                 debug: list[dict] | None = None) -> UnfoldTrace:
    """J iterations of y_j = P(x_{j-1}, z), x_j = R(y_j, z), starting from
    the bicubic upsampling of z. No clamping between iterations."""
    cfg = model.cfg
    wrap = pad_mode == "circular"
    x0 = bicubic_resize(z, cfg.scale, wrap=wrap)
    y_hats: list[Tensor] = []
    x_hats = [x0]
    for j in range(cfg.iterations):
        x_prev = x_hats[-1]
        if cfg.truncate_unroll and j > 0:
            x_prev = x_prev.detach()
        dbg = {} if debug is not None else None
        y_j = model.arm_at(j).forward(x_prev, z, pad_mode, debug=dbg)
        x_j = model.rem_at(j).forward(y_j, z, pad_mode, debug=dbg)
        if dbg is not None:
            debug.append(dbg)
        y_hats.append(y_j)
        x_hats.append(x_j)
    return UnfoldTrace(y_hats=y_hats, x_hats=x_hats)


def unfold_loss(trace: UnfoldTrace, y: Tensor, x: Tensor,
                cfg: ModelConfig) -> Tensor:
    """Mean-absolute-error losses of both outputs at every iteration,
    weighted by the curriculum schedule rho and averaged over iterations."""
    if len(cfg.rho) != len(trace.y_hats):
        raise ValueError(
            f"rho has {len(cfg.rho)} weights for {len(trace.y_hats)} iterations")
    total = None
    for j, rho_j in enumerate(cfg.rho):
        term = ((trace.y_hats[j] - y).abs().mean()
                + cfg.gamma * (trace.x_hats[j + 1] - x).abs().mean()) * rho_j
        total = term if total is None else total + term
    return total * (1.0 / len(cfg.rho))


def _replace_registered_copy(x_hat: Tensor, refined: Tensor, s: int,
                             k_copy: int) -> Tensor:
    """Substitute the registered space-to-depth copy of an HR image and
    shuffle back: LR-scale refinement applied at the HR phase it aligns with."""
    copies = space_to_depth(x_hat, s)
    cat = concat_channels([copies, refined])
    n = COLORS * s * s
    k0 = k_copy - 1
    idx = [n + c // (s * s) if c % (s * s) == k0 else c for c in range(n)]
    return pixel_shuffle(gather_channels(cat, idx), s)


def topology_forward(z: Tensor, model: Model, pad_mode: str = "zeros"):
    """Run one of the ablation topologies; returns (y_hat, x_hat).

    Auxiliary inputs that a topology removes are replaced by the bicubic
    initialization of the quantity they estimate.
    """
    cfg = model.cfg
    wrap = pad_mode == "circular"
    if cfg.topology == "parallel_series":
        trace = unfold_infer(z, model, pad_mode)
        return trace.y_hats[-1], trace.x_hats[-1]
    arm, rem = model.arms[0], model.rems[0]
    if cfg.topology == "arm_then_rem":
        x0 = bicubic_resize(z, cfg.scale, wrap=wrap)
        y_hat = arm.forward(x0, z, pad_mode)
        return y_hat, rem.forward(y_hat, z, pad_mode)
    if cfg.topology == "rem_then_arm":
        x_hat = rem.forward(z, z, pad_mode)
        y_ref = arm.forward(x_hat, z, pad_mode)
        out = _replace_registered_copy(x_hat, y_ref, cfg.scale, arm.k_copy)
        return y_ref, out
    # parallel_fusion: both modules run from the raw input, a 3x3 conv fuses
    x0 = bicubic_resize(z, cfg.scale, wrap=wrap)
    y_hat = arm.forward(x0, z, pad_mode)
    x_rem = rem.forward(z, z, pad_mode)
    y_up = bicubic_resize(y_hat, cfg.scale, wrap=wrap)
    out = model.fusion_conv(concat_channels([y_up, x_rem]), pad_mode)
    return y_hat, out


def forward_loss(z: Tensor, y: Tensor, x: Tensor, model: Model) -> Tensor:
    """Training loss for any topology."""
    if model.cfg.topology == "parallel_series":
        return unfold_loss(unfold_infer(z, model), y, x, model.cfg)
    y_hat, x_hat = topology_forward(z, model)
    return (y_hat - y).abs().mean() + model.cfg.gamma * (x_hat - x).abs().mean()


def super_resolve(z: np.ndarray, model: Model) -> np.ndarray:
    """Final HR estimate for one (C, H, W) image, clamped to [0, 1]."""
    zt = Tensor(z[None])
    if model.cfg.topology == "parallel_series":
        out = unfold_infer(zt, model).x_hats[-1]
    else:
        out = topology_forward(zt, model)[1]
    return np.clip(out.data[0], 0.0, 1.0)


# -- training ----------------------------------------------------------------

@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    val_psnr: list[tuple[int, float]] = field(default_factory=list)
    best_step: int = 0


def _augment(arrs: list[np.ndarray], rng: np.random.Generator):
    k = int(rng.integers(4))
    flip = bool(rng.integers(2))
    out = []
    for a in arrs:
        a = np.rot90(a, k, axes=(-2, -1))
        if flip:
            a = a[..., ::-1]
        out.append(np.ascontiguousarray(a))
    return out


def _sample_batch(triples: list[TrainingTriple], cfg: ModelConfig,
                  rng: np.random.Generator):
    xs, ys, zs = [], [], []
    s, ps = cfg.scale, cfg.patch_size
    for _ in range(cfg.n_patches):
        t = triples[int(rng.integers(len(triples)))]
        h, w = t.y.shape[-2:]
        i = int(rng.integers(h - ps + 1))
        j = int(rng.integers(w - ps + 1))
        x = t.x[:, s * i:s * (i + ps), s * j:s * (j + ps)]
        y = t.y[:, i:i + ps, j:j + ps]
        z = t.z[:, i:i + ps, j:j + ps]
        x, y, z = _augment([x, y, z], rng)
        xs.append(x)
        ys.append(y)
        zs.append(z)
    return (Tensor(np.stack(xs)), Tensor(np.stack(ys)), Tensor(np.stack(zs)))


def validate(model: Model, triples: list[TrainingTriple]) -> float:
    """Mean PSNR of the final estimate over a validation set."""
    vals = [psnr(super_resolve(t.z, model), t.x) for t in triples]
    return float(np.mean(vals))


def train(cfg: ModelConfig, train_triples: list[TrainingTriple],
          val_triples: list[TrainingTriple] | None = None,
          model: Model | None = None, log=None,
          log_interval: int = 50) -> tuple[Model, TrainHistory]:
    """Training loop: sample crops, augment, unfold, L1 loss, Adam.

    Deterministic under cfg.seed. Early-stops when validation PSNR has not
    improved for cfg.patience validation rounds; the best parameters are
    restored before returning.
    """
    if not train_triples:
        raise ValueError("empty training set")
    for t in train_triples:
        if min(t.y.shape[-2:]) < cfg.patch_size:
            raise ValueError(
                f"patch size {cfg.patch_size} exceeds LR image "
                f"{t.y.shape[-2]}x{t.y.shape[-1]}")
    if model is None:
        model = Model(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    history = TrainHistory()
    best = None
    stale = 0
    t_start = time.monotonic()
    for step in range(1, cfg.max_steps + 1):
        x, y, z = _sample_batch(train_triples, cfg, rng)
        loss = forward_loss(z, y, x, model)
        model.params_arm.zero_grad()
        model.params_rem.zero_grad()
        loss.backward()
        adam_step(model.params_arm, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        adam_step(model.params_rem, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        history.losses.append(loss.item())
        if log is not None and (step % log_interval == 0 or step == 1):
            iter_psnr = ""
            if cfg.topology == "parallel_series":
                trace = unfold_infer(z, model)
                vals = [psnr(np.clip(xj.data, 0, 1), x.data)
                        for xj in trace.x_hats[1:]]
                iter_psnr = " psnr=" + ",".join(f"{v:.3f}" for v in vals)
            log(f"step={step} loss={loss.item():.6f}{iter_psnr} "
                f"wall={time.monotonic() - t_start:.1f}s")
        if val_triples and step % cfg.val_interval == 0:
            score = validate(model, val_triples)
            history.val_psnr.append((step, score))
            if log is not None:
                log(f"step={step} val_psnr={score:.4f}")
            if best is None or score > best[0]:
                best = (score, step,
                        {k: v.copy() for k, v in
                         model.params_arm.state_arrays().items()},
                        {k: v.copy() for k, v in
                         model.params_rem.state_arrays().items()})
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    if best is not None:
        history.best_step = best[1]
        model.params_arm.load_arrays(best[2])
        model.params_rem.load_arrays(best[3])
    return model, history
