"""Built-in correctness suite: fast implementations against brute-force
oracles and analytic gradients against finite differences.

Each check prints one PASS/FAIL line; run_selftest returns the number of
failures so the CLI can turn it into an exit code.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .blocking import detect_blocking
from .codec import build_quant_table, compress
from .config import toy_config
from .fusion import FusionNet, fuse
from .metrics import psnr, ssim
from .model import Model
from .nonlocal_op import NonLocalConfig, nonlocal_filter
from .params import ParameterSet
from .reference import (block_codec_naive, conv2d_naive,
                        finite_difference_grad, max_rel_error,
                        nonlocal_filter_naive, ssim_naive)
from .tensor import Tensor, conv2d


def _check_conv_forward():
    tensor.set_default_dtype(np.float64)
    try:
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 3, 7, 6))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        fast = conv2d(Tensor(x), Tensor(w), Tensor(b), padding=1).data
        slow = conv2d_naive(x, w, b, padding=1)
        assert max_rel_error(fast, slow) < 1e-10
    finally:
        tensor.set_default_dtype(np.float32)


def _check_conv_gradient():
    tensor.set_default_dtype(np.float64)
    try:
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 2, 5, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        xt = Tensor(x.copy(), requires_grad=True)
        wt = Tensor(w, requires_grad=True)
        out = conv2d(xt, wt, None, padding=1)
        loss = (out * out).mean()
        loss.backward()
        num = finite_difference_grad(
            lambda: (conv2d(Tensor(xt.data), Tensor(wt.data), None,
                            padding=1).data ** 2).mean(),
            xt.data, eps=1e-5)
        assert max_rel_error(xt.grad, num) < 1e-6
    finally:
        tensor.set_default_dtype(np.float32)


def _check_nonlocal_oracle():
    rng = np.random.default_rng(2)
    z = rng.random((1, 3, 10, 10), dtype=np.float32)
    g = rng.random((1, 3, 10, 10), dtype=np.float32)
    d = (rng.random((1, 1, 10, 10)) > 0.3).astype(np.float32)
    h = np.full((1, 1, 10, 10), 0.4, dtype=np.float32)
    cfg = NonLocalConfig(patch_radius=1, window_radius=10)
    fast = nonlocal_filter(Tensor(z), Tensor(g), d, Tensor(h), cfg).data
    slow = nonlocal_filter_naive(z[0], g[0], d[0, 0], h[0, 0], 1, 10)
    assert max_rel_error(fast[0], slow, floor=1e-3) < 1e-5


def _check_nonlocal_gradient():
    tensor.set_default_dtype(np.float64)
    try:
        rng = np.random.default_rng(3)
        z = rng.random((1, 2, 6, 6))
        g = rng.random((1, 2, 6, 6))
        d = np.ones((1, 1, 6, 6))
        h = np.full((1, 1, 6, 6), 0.5)
        cfg = NonLocalConfig(patch_radius=1, window_radius=2)
        gt = Tensor(g.copy(), requires_grad=True)
        u = nonlocal_filter(Tensor(z), gt, d, Tensor(h), cfg)
        loss = (u * u).mean()
        loss.backward()
        num = finite_difference_grad(
            lambda: (nonlocal_filter(Tensor(z), Tensor(gt.data), d, Tensor(h),
                                     cfg).data ** 2).mean(),
            gt.data, eps=1e-5)
        assert max_rel_error(gt.grad, num) < 1e-4
    finally:
        tensor.set_default_dtype(np.float32)


def _check_codec_oracle():
    rng = np.random.default_rng(4)
    x = rng.random((1, 8, 8), dtype=np.float32)
    table = build_quant_table(10)
    fast = compress(x, table)
    slow = block_codec_naive(x[0] * 255.0, table.values) / 255.0
    assert max_rel_error(fast[0], slow, floor=1e-3) < 1e-6
    flat = np.full((3, 16, 16), 128.0 / 255.0, dtype=np.float32)
    assert np.array_equal(compress(flat, table), flat)


def _check_blocking_detector():
    tiles = np.zeros((1, 24, 24), dtype=np.float32)
    tiles[:, :, 8:16] += 0.5
    d = detect_blocking(tiles, block_size=8).values
    assert d.min() == 0 and d.max() == 1
    flat = np.full((1, 24, 24), 0.25, dtype=np.float32)
    assert detect_blocking(flat, block_size=8).values.min() == 1


def _check_fusion_convexity():
    rng = np.random.default_rng(5)
    pset = ParameterSet()
    net = FusionNet(pset, "f.", 3, 3, rng)
    sources = [Tensor(rng.random((4, 3, 6, 6), dtype=np.float32))
               for _ in range(3)]
    w = net.estimate_weights(sources)
    assert max_rel_error(w.data.sum(axis=1), np.ones((4, 6, 6))) < 1e-6
    out = fuse(sources, w).data
    lo = np.minimum.reduce([s.data for s in sources])
    hi = np.maximum.reduce([s.data for s in sources])
    assert np.all(out >= lo - 1e-6) and np.all(out <= hi + 1e-6)


def _check_model_gradient():
    cfg = toy_config(seed=6)
    m = Model(cfg)
    rng = np.random.default_rng(7)
    z = Tensor(rng.random((1, 3, 16, 16), dtype=np.float32))
    x = Tensor(rng.random((1, 3, 32, 32), dtype=np.float32))
    from .unfold import forward_loss
    loss = forward_loss(z, Tensor(z.data.copy()), x, m)
    m.params_arm.zero_grad()
    m.params_rem.zero_grad()
    loss.backward()
    grads = [p.grad for _, ps in (("a", m.params_arm), ("r", m.params_rem))
             for _, p in ps.items() if p.grad is not None]
    assert grads and all(np.all(np.isfinite(g)) for g in grads)


def _check_metrics():
    a = np.full((3, 16, 16), 0.5)
    assert psnr(a, a) == 99.0
    b = a + 0.1
    assert abs(psnr(a, b) - 20.0) < 1e-9
    rng = np.random.default_rng(8)
    p = rng.random((1, 14, 14))
    q = np.clip(p + 0.05 * rng.standard_normal(p.shape), 0, 1)
    assert abs(ssim(p, q) - ssim_naive(p[0], q[0])) < 1e-6


CHECKS = [
    ("conv-forward-oracle", _check_conv_forward),
    ("conv-gradient", _check_conv_gradient),
    ("nonlocal-oracle", _check_nonlocal_oracle),
    ("nonlocal-gradient", _check_nonlocal_gradient),
    ("codec-oracle", _check_codec_oracle),
    ("blocking-detector", _check_blocking_detector),
    ("fusion-convexity", _check_fusion_convexity),
    ("model-gradient-finite", _check_model_gradient),
    ("metric-oracles", _check_metrics),
]


def run_selftest(out=print) -> int:
    failures = 0
    for name, check in CHECKS:
        try:
            check()
        except Exception as e:  # report and continue
            failures += 1
            out(f"FAIL {name}: {type(e).__name__}: {e}")
        else:
            out(f"PASS {name}")
    return failures
