"""Bit-exact binary checkpoints for both parameter sets plus the config.

Layout (all integers little-endian):

    magic           8 bytes  b"CISRCKPT"
    version         u32
    config length   u32, then that many UTF-8 bytes of canonical config text
    two tensor tables (ARM then REM), each:
        count       u32
        per entry:  u16 name length, name UTF-8, u8 rank,
                    rank x u32 dims, raw float32 values
    checksum        first 8 bytes of SHA-256 over everything above

The same parameters always serialize to the same bytes, so saving,
loading, and saving again is byte-identical.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .config import ModelConfig, config_from_text, config_to_text

MAGIC = b"CISRCKPT"
VERSION = 1
_CHECKSUM_LEN = 8
_MAX_DIM = 2 ** 32 - 1


class CheckpointError(ValueError):
    pass


def _pack_table(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise CheckpointError(f"parameter name too long: {name[:40]}...")
        if arr.ndim > 0xFF:
            raise CheckpointError(f"rank overflow for {name!r}: {arr.ndim}")
        if any(d > _MAX_DIM for d in arr.shape):
            raise CheckpointError(f"dimension overflow for {name!r}: {arr.shape}")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def serialize(arrays_arm: dict[str, np.ndarray],
              arrays_rem: dict[str, np.ndarray], cfg: ModelConfig) -> bytes:
    text = config_to_text(cfg).encode("utf-8")
    body = (MAGIC + struct.pack("<I", VERSION)
            + struct.pack("<I", len(text)) + text
            + _pack_table(arrays_arm) + _pack_table(arrays_rem))
    return body + hashlib.sha256(body).digest()[:_CHECKSUM_LEN]


def save_checkpoint(params_arm, params_rem, cfg: ModelConfig, path: str):
    """params_arm/params_rem are ParameterSets (or name -> array dicts)."""
    arm = params_arm if isinstance(params_arm, dict) else params_arm.state_arrays()
    rem = params_rem if isinstance(params_rem, dict) else params_rem.state_arrays()
    with open(path, "wb") as f:
        f.write(serialize(arm, rem, cfg))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.buf) - self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return self.take(1)[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def _unpack_table(r: _Reader) -> dict[str, np.ndarray]:
    arrays = {}
    for _ in range(r.u32()):
        name = r.take(r.u16()).decode("utf-8")
        rank = r.u8()
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims)
        if name in arrays:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        arrays[name] = data.astype(np.float32)
    return arrays


def deserialize(buf: bytes):
    if len(buf) < len(MAGIC) + 4 + _CHECKSUM_LEN:
        raise CheckpointError("truncated checkpoint: shorter than the header")
    body, stored = buf[:-_CHECKSUM_LEN], buf[-_CHECKSUM_LEN:]
    if hashlib.sha256(body).digest()[:_CHECKSUM_LEN] != stored:
        raise CheckpointError("checksum mismatch: file corrupted or truncated")
    r = _Reader(body)
    magic = r.take(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, not a checkpoint file")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    cfg = config_from_text(r.take(r.u32()).decode("utf-8"))
    arm = _unpack_table(r)
    rem = _unpack_table(r)
    if r.pos != len(body):
        raise CheckpointError(f"{len(body) - r.pos} trailing bytes after tensors")
    return arm, rem, cfg


def load_checkpoint(path: str, expected_cfg: ModelConfig | None = None):
    """Returns (arrays_arm, arrays_rem, cfg); optionally gates on a config."""
    with open(path, "rb") as f:
        buf = f.read()
    arm, rem, cfg = deserialize(buf)
    if expected_cfg is not None and config_to_text(cfg) != config_to_text(expected_cfg):
        raise CheckpointError(
            "config mismatch: checkpoint was produced by a different "
            f"configuration (e.g. scale {cfg.scale} vs {expected_cfg.scale})")
    return arm, rem, cfg


def load_model(path: str):
    """Rebuild a Model from a checkpoint."""
    from .model import Model
    arm, rem, cfg = load_checkpoint(path)
    model = Model(cfg)
    model.params_arm.load_arrays(arm)
    model.params_rem.load_arrays(rem)
    return model
