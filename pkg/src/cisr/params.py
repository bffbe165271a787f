"""Named parameter collections, initialization and the Adam update."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, conv2d


class ParameterSet:
    """Ordered, uniquely named collection of learnable tensors.

    Iteration order is insertion order and is what the checkpoint format
    serializes, so it must be deterministic across runs.
    """

    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.step_count = 0

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self._entries[name] = t
        return t

    def __len__(self):
        return len(self._entries)

    def __contains__(self, name):
        return name in self._entries

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def tensors(self):
        return self._entries.values()

    def num_values(self) -> int:
        return sum(t.size for t in self._entries.values())

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self._entries.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Copy values in by name; names and shapes must match exactly."""
        if list(arrays) != self.names():
            raise ValueError(
                "parameter name mismatch: checkpoint "
                f"{sorted(set(arrays) ^ set(self.names()))[:4]}..."
                if set(arrays) != set(self.names())
                else "parameter ordering mismatch"
            )
        for k, a in arrays.items():
            t = self._entries[k]
            if a.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {k!r}: {a.shape} vs {t.data.shape}")
            t.data = a.astype(t.data.dtype, copy=True)
        self._moments.clear()
        self.step_count = 0


def adam_step(params: ParameterSet, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update; clears gradients afterwards."""
    params.step_count += 1
    t = params.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if name not in params._moments:
            params._moments[name] = (np.zeros_like(p.data), np.zeros_like(p.data))
        m, v = params._moments[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None


def kaiming_normal(rng: np.random.Generator, out_ch: int, in_ch: int,
                   k: int) -> np.ndarray:
    fan_in = in_ch * k * k
    std = np.sqrt(2.0 / fan_in)
    return rng.normal(0.0, std, size=(out_ch, in_ch, k, k))


class Conv:
    """A conv layer registered in a ParameterSet; zero bias at init."""

    def __init__(self, pset: ParameterSet, name: str, in_ch: int, out_ch: int,
                 k: int, rng: np.random.Generator, zero_init: bool = False):
        if zero_init:
            w = np.zeros((out_ch, in_ch, k, k))
        else:
            w = kaiming_normal(rng, out_ch, in_ch, k)
        self.k = k
        self.weight = pset.add(name + ".weight", w)
        self.bias = pset.add(name + ".bias", np.zeros(out_ch))

    def __call__(self, x: Tensor, pad_mode: str = "zeros") -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=1,
                      padding=self.k // 2, pad_mode=pad_mode)
