"""Rank-4 tensor arithmetic with reverse-mode automatic differentiation.

A small numpy-backed autograd engine carrying exactly the primitives the
restoration networks compose: convolution, activations, pooling, pixel
(un)shuffle, bicubic resampling, concatenation and elementwise arithmetic.
Images and features live in (batch, channel, height, width) order.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_DEFAULT_DTYPE = np.float32


def set_default_dtype(dtype) -> None:
    """Set the dtype used when constructing tensors from raw data.

    float64 exists only so gradient checks can run at full precision.
    """
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """A numpy array plus an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar tensor, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        return _binary(self, other, lambda a, b: a + b,
                       lambda g, a, b: g, lambda g, a, b: g)

    __radd__ = __add__

    def __sub__(self, other):
        return _binary(self, other, lambda a, b: a - b,
                       lambda g, a, b: g, lambda g, a, b: -g)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return _binary(self, other, lambda a, b: a * b,
                       lambda g, a, b: g * b, lambda g, a, b: g * a)

    __rmul__ = __mul__

    def __neg__(self):
        return _unary(self, lambda a: -a, lambda g, a, out: -g)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return _binary(self, other, lambda a, b: a / b,
                           lambda g, a, b: g / b,
                           lambda g, a, b: -g * a / (b * b))
        return self * (1.0 / other)

    def abs(self):
        # subgradient at 0 pinned to 0
        return _unary(self, np.abs, lambda g, a, out: g * np.sign(a))

    def sum(self):
        out = _result(np.asarray(self.data.sum(), dtype=self.data.dtype), (self,))
        if out.requires_grad:
            def bwd(g):
                self._accumulate(np.broadcast_to(g, self.data.shape))
            out._backward = bwd
        return out

    def mean(self):
        n = self.data.size
        out = _result(np.asarray(self.data.mean(), dtype=self.data.dtype), (self,))
        if out.requires_grad:
            def bwd(g):
                self._accumulate(np.broadcast_to(g / n, self.data.shape))
            out._backward = bwd
        return out


def _result(data: np.ndarray, parents: tuple) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out._backward = None
    out._prev = tuple(p for p in parents if p.requires_grad) if out.requires_grad else ()
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _unary(x: Tensor, fwd, bwd) -> Tensor:
    out = _result(fwd(x.data), (x,))
    if out.requires_grad:
        xd, od = x.data, out.data

        def backward(g):
            x._accumulate(bwd(g, xd, od))

        out._backward = backward
    return out


def _binary(x: Tensor, other, fwd, bwd_a, bwd_b) -> Tensor:
    if isinstance(other, Tensor):
        out = _result(fwd(x.data, other.data), (x, other))
        if out.requires_grad:
            xd, yd = x.data, other.data

            def backward(g):
                if x.requires_grad:
                    x._accumulate(_unbroadcast(bwd_a(g, xd, yd), xd.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(bwd_b(g, xd, yd), yd.shape))

            out._backward = backward
        return out
    const = np.asarray(other, dtype=x.data.dtype)
    out = _result(fwd(x.data, const), (x,))
    if out.requires_grad:
        xd = x.data

        def backward(g):
            x._accumulate(_unbroadcast(bwd_a(g, xd, const), xd.shape))

        out._backward = backward
    return out


# -- activations ---------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    return _unary(x, lambda a: np.maximum(a, 0),
                  lambda g, a, out: g * (a > 0))


def _sigmoid_stable(a: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    return _unary(x, _sigmoid_stable,
                  lambda g, a, out: g * out * (1.0 - out))


def softmax_over_channels(x: Tensor) -> Tensor:
    """Per-pixel softmax along the channel axis of a (B, C, H, W) tensor."""
    if x.ndim != 4 or x.shape[1] < 1:
        raise ValueError(f"softmax_over_channels needs a 4-d tensor, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _result(y.astype(x.data.dtype), (x,))
    if out.requires_grad:
        yd = out.data

        def backward(g):
            dot = (g * yd).sum(axis=1, keepdims=True)
            x._accumulate(yd * (g - dot))

        out._backward = backward
    return out


# -- convolution ---------------------------------------------------------

def _pad_input(x: np.ndarray, padding: int, pad_mode: str) -> np.ndarray:
    if padding == 0:
        return x
    widths = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    if pad_mode == "zeros":
        return np.pad(x, widths)
    if pad_mode == "circular":
        return np.pad(x, widths, mode="wrap")
    raise ValueError(f"unknown pad_mode {pad_mode!r}")


def _unpad_grad(gp: np.ndarray, padding: int, pad_mode: str) -> np.ndarray:
    if padding == 0:
        return gp
    p = padding
    core = gp[:, :, p:-p, p:-p]
    if pad_mode == "zeros":
        return core
    # circular: borders wrap back onto the opposite side
    core = core.copy()
    core[:, :, -p:, :] += gp[:, :, :p, p:-p]
    core[:, :, :p, :] += gp[:, :, -p:, p:-p]
    core[:, :, :, -p:] += gp[:, :, p:-p, :p]
    core[:, :, :, :p] += gp[:, :, p:-p, -p:]
    core[:, :, -p:, -p:] += gp[:, :, :p, :p]
    core[:, :, -p:, :p] += gp[:, :, :p, -p:]
    core[:, :, :p, -p:] += gp[:, :, -p:, :p]
    core[:, :, :p, :p] += gp[:, :, -p:, -p:]
    return core


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, pad_mode: str = "zeros") -> Tensor:
    """2-d cross-correlation over (B, C, H, W) with an (O, C, kH, kW) kernel."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d needs 4-d input and weight, got {x.shape} and {weight.shape}")
    B, C, H, W = x.shape
    O, Cw, kH, kW = weight.shape
    if C != Cw:
        raise ValueError(
            f"conv2d channel mismatch: input {x.shape} has {C} channels, "
            f"weight {weight.shape} expects {Cw}"
        )
    xp = _pad_input(x.data, padding, pad_mode)
    Hp, Wp = xp.shape[2], xp.shape[3]
    Ho = (Hp - kH) // stride + 1
    Wo = (Wp - kW) // stride + 1
    if Ho <= 0 or Wo <= 0:
        raise ValueError(f"conv2d output would be empty for input {x.shape}, kernel {weight.shape}")
    win = np.lib.stride_tricks.sliding_window_view(xp, (kH, kW), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]                      # (B, C, Ho, Wo, kH, kW)
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(B, C * kH * kW, Ho * Wo)
    wmat = weight.data.reshape(O, C * kH * kW)
    y = np.matmul(wmat, cols).reshape(B, O, Ho, Wo)
    if bias is not None:
        y = y + bias.data.reshape(1, O, 1, 1)
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = _result(y.astype(x.data.dtype), parents)
    if out.requires_grad:
        cols_saved = cols if (x.requires_grad or weight.requires_grad) else None

        def backward(g):
            gf = g.reshape(B, O, Ho * Wo)
            if bias is not None and bias.requires_grad:
                bias._accumulate(g.sum(axis=(0, 2, 3)))
            if weight.requires_grad:
                gw = np.matmul(gf, cols_saved.transpose(0, 2, 1)).sum(axis=0)
                weight._accumulate(gw.reshape(weight.data.shape))
            if x.requires_grad:
                gcols = np.matmul(wmat.T, gf)                # (B, K, L)
                gc = gcols.reshape(B, C, kH, kW, Ho, Wo)
                gxp = np.zeros((B, C, Hp, Wp), dtype=g.dtype)
                for i in range(kH):
                    for j in range(kW):
                        gxp[:, :, i:i + stride * Ho:stride,
                            j:j + stride * Wo:stride] += gc[:, :, i, j]
                x._accumulate(_unpad_grad(gxp, padding, pad_mode))

        out._backward = backward
    return out


# -- pooling and rearrangement -------------------------------------------

def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel, output shape (B, C, 1, 1)."""
    B, C, H, W = x.shape
    y = x.data.mean(axis=(2, 3), keepdims=True)
    out = _result(y, (x,))
    if out.requires_grad:
        def backward(g):
            x._accumulate(np.broadcast_to(g / (H * W), x.data.shape))
        out._backward = backward
    return out


def _s2d(a: np.ndarray, s: int) -> np.ndarray:
    B, C, H, W = a.shape
    a = a.reshape(B, C, H // s, s, W // s, s)
    a = a.transpose(0, 1, 3, 5, 2, 4)
    return a.reshape(B, C * s * s, H // s, W // s)


def _ps(a: np.ndarray, s: int) -> np.ndarray:
    B, C, H, W = a.shape
    a = a.reshape(B, C // (s * s), s, s, H, W)
    a = a.transpose(0, 1, 4, 2, 5, 3)
    return a.reshape(B, C // (s * s), H * s, W * s)


def space_to_depth(x: Tensor, s: int) -> Tensor:
    """(B, C, H, W) -> (B, s*s*C, H/s, W/s); copy index c' = c*s*s + dy*s + dx."""
    B, C, H, W = x.shape
    if H % s or W % s:
        raise ValueError(f"space_to_depth: dims {H}x{W} not divisible by {s}")
    out = _result(_s2d(x.data, s), (x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(_ps(g, s))
    return out


def pixel_shuffle(x: Tensor, s: int) -> Tensor:
    """(B, C, H, W) -> (B, C/s^2, sH, sW); exact inverse of space_to_depth."""
    B, C, H, W = x.shape
    if C % (s * s):
        raise ValueError(f"pixel_shuffle: {C} channels not divisible by {s * s}")
    out = _result(_ps(x.data, s), (x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(_s2d(g, s))
    return out


def concat_channels(tensors: list[Tensor]) -> Tensor:
    """Concatenate along the channel axis (the only concatenation supported)."""
    data = np.concatenate([t.data for t in tensors], axis=1)
    out = _result(data, tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[1] for t in tensors]

        def backward(g):
            start = 0
            for t, c in zip(tensors, sizes):
                if t.requires_grad:
                    t._accumulate(g[:, start:start + c])
                start += c

        out._backward = backward
    return out


def gather_channels(x: Tensor, indices) -> Tensor:
    """Select channels by index list (duplicates allowed)."""
    idx = np.asarray(indices, dtype=np.intp)
    out = _result(x.data[:, idx], (x,))
    if out.requires_grad:
        def backward(g):
            gx = np.zeros_like(x.data)
            np.add.at(gx, (slice(None), idx), g)
            x._accumulate(gx)
        out._backward = backward
    return out


def narrow_channels(x: Tensor, start: int, count: int) -> Tensor:
    """Select a contiguous channel range."""
    out = _result(x.data[:, start:start + count], (x,))
    if out.requires_grad:
        def backward(g):
            gx = np.zeros_like(x.data)
            gx[:, start:start + count] = g
            x._accumulate(gx)
        out._backward = backward
    return out


# -- bicubic resampling ----------------------------------------------------

def _keys(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    t = np.abs(t)
    out = np.where(
        t <= 1.0,
        (a + 2.0) * t ** 3 - (a + 3.0) * t ** 2 + 1.0,
        np.where(t < 2.0, a * t ** 3 - 5.0 * a * t ** 2 + 8.0 * a * t - 4.0 * a, 0.0),
    )
    return out


@lru_cache(maxsize=256)
def _resample_matrix(n_in: int, n_out: int, wrap: bool) -> np.ndarray:
    """Row-stochastic 1-d resampling matrix: Keys a=-0.5, half-pixel centers,
    edge-clamped (or wrapped) taps."""
    scale = n_out / n_in
    M = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        src = (i + 0.5) / scale - 0.5
        base = math.floor(src)
        for t in range(base - 1, base + 3):
            w = float(_keys(np.asarray(src - t)))
            idx = t % n_in if wrap else min(max(t, 0), n_in - 1)
            M[i, idx] += w
    return M


def resize_array(a: np.ndarray, out_h: int, out_w: int, wrap: bool = False) -> np.ndarray:
    """Bicubic resampling of the last two axes of a numpy array."""
    Mh = _resample_matrix(a.shape[-2], out_h, wrap)
    Mw = _resample_matrix(a.shape[-1], out_w, wrap)
    y = np.matmul(Mh, a.astype(np.float64))
    y = np.matmul(y, Mw.T)
    return y.astype(a.dtype)


def bicubic_resize(x: Tensor, scale, wrap: bool = False) -> Tensor:
    """Separable Keys (a=-0.5) resampling with half-pixel alignment."""
    B, C, H, W = x.shape
    out_h = int(math.floor(scale * H + 0.5))
    out_w = int(math.floor(scale * W + 0.5))
    if out_h < 1 or out_w < 1:
        raise ValueError(f"bicubic_resize: scale {scale} collapses {H}x{W} to zero size")
    Mh = _resample_matrix(H, out_h, wrap)
    Mw = _resample_matrix(W, out_w, wrap)
    y = np.matmul(np.matmul(Mh, x.data.astype(np.float64)), Mw.T)
    out = _result(y.astype(x.data.dtype), (x,))
    if out.requires_grad:
        def backward(g):
            gx = np.matmul(np.matmul(Mh.T, g.astype(np.float64)), Mw)
            x._accumulate(gx.astype(x.data.dtype))
        out._backward = backward
    return out
