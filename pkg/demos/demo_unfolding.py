"""Walkthrough of the recursive unfolding: two weight-shared modules
(artefacts removal and resolution enhancement) iterated J times, the
adaptive convex skip connection, and the curriculum loss.

Run:  python3 demos/demo_unfolding.py
"""

import numpy as np

from cisr.codec import make_triple
from cisr.config import ModelConfig, toy_config
from cisr.fusion import fuse
from cisr.metrics import psnr
from cisr.model import Model, select_registered_copy
from cisr.tensor import Tensor
from cisr.unfold import unfold_infer, unfold_loss

rng = np.random.default_rng(0)

# ---------------------------------------------------------------------------
# 1. Weight sharing: one ARM and one REM are reused in every iteration,
#    so the learnable-parameter count does not depend on J.
# ---------------------------------------------------------------------------
for j in (1, 3, 5):
    cfg = toy_config(iterations=j)
    print(f"J={j}: {Model(cfg).parameter_count():,} parameters")

# ---------------------------------------------------------------------------
# 2. The registered space-to-depth copy: of the s^2 phase-shifted
#    low-resolution copies of the HR estimate, the ARM treats copy
#    k = round((s^2+1)/2) as the one aligned with the compressed input.
# ---------------------------------------------------------------------------
for s in (2, 3, 4):
    print(f"scale {s}: registered copy k = {select_registered_copy(s)} "
          f"of {s * s}")

# ---------------------------------------------------------------------------
# 3. Run the unfolding on a degraded triple. Iteration 0 is the bicubic
#    up-sampling of z; each following iteration refines both estimates.
#    An untrained model with zero-initialized output layers starts out as
#    its skip connection, so the iterates stay close to the baseline.
# ---------------------------------------------------------------------------
yy, xx = np.mgrid[0:48, 0:48] / 47.0
img = np.clip(np.stack([0.5 + 0.4 * np.sin(12 * xx),
                        0.5 + 0.4 * np.cos(9 * yy),
                        xx * yy]), 0, 1).astype(np.float32)
triple = make_triple(img, 2, qf=10)

model = Model(toy_config(iterations=3, rho=[0.3, 0.6, 1.0], seed=0))
trace = unfold_infer(Tensor(triple.z[None]), model)
print(f"\ntrace: {len(trace.y_hats)} LR estimates, "
      f"{len(trace.x_hats)} HR estimates (x_hat_0 = bicubic)")
for j, xh in enumerate(trace.x_hats):
    print(f"  x_hat_{j}: PSNR = "
          f"{psnr(np.clip(xh.data[0], 0, 1), triple.x):.2f} dB")

# ---------------------------------------------------------------------------
# 4. The curriculum loss weights later iterations more heavily
#    (rho non-decreasing), nudging training toward a good final iterate
#    rather than a good first one.
# ---------------------------------------------------------------------------
y_t = Tensor(triple.y[None])
x_t = Tensor(triple.x[None])
loss = unfold_loss(trace, y_t, x_t, model.cfg)
print(f"\ncurriculum loss (rho={model.cfg.rho}): {loss.item():.5f}")

# ---------------------------------------------------------------------------
# 5. The long skip connection is a pixel-wise convex combination of the
#    compressed input z, the auxiliary image g, and the non-local
#    output u; the weight maps sum to one at every pixel.
# ---------------------------------------------------------------------------
arm = model.arms[0]
sources = [Tensor(rng.random((1, 3, 24, 24), dtype=np.float32))
           for _ in range(3)]
weights = arm.fusion.estimate_weights(sources)
print(f"\nfusion weight maps: shape {weights.shape}, "
      f"per-pixel sum in [{weights.data.sum(axis=1).min():.6f}, "
      f"{weights.data.sum(axis=1).max():.6f}]")
v = fuse(sources, weights)
lo = np.minimum.reduce([s.data for s in sources])
hi = np.maximum.reduce([s.data for s in sources])
print("fused image inside the per-pixel envelope: "
      f"{bool(np.all(v.data >= lo - 1e-6) and np.all(v.data <= hi + 1e-6))}")
