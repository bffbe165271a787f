"""Training-triple manufacture: bicubic down-sampling plus a simulated
block-DCT quantization codec ("jpegsim").

The codec reproduces the structure of block-transform compression (8x8
DCT, quality-scaled quantization, blocking/ringing artefacts) without any
bitstream: per channel, level-shift, block DCT, quantize, dequantize,
inverse DCT.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .tensor import resize_array

# JPEG Annex-K luminance quantization table
BASE_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)

CODEC_ID = "jpegsim"
BLOCK = 8


@dataclass(frozen=True)
class QuantTable:
    values: np.ndarray            # (8, 8) ints in [1, 255]
    quality_factor: int


@dataclass
class TrainingTriple:
    x: np.ndarray                 # HR image (C, sH, sW) in [0, 1]
    y: np.ndarray                 # clean LR (C, H, W)
    z: np.ndarray                 # compressed LR (C, H, W)
    scale: int
    qf: int
    codec_id: str = CODEC_ID


def build_quant_table(qf: int) -> QuantTable:
    """Quality-scaled table: scale = 5000/qf below 50, else 200 - 2*qf."""
    if not 1 <= qf <= 100:
        raise ValueError(f"quality factor {qf} out of [1, 100]")
    scale = 5000.0 / qf if qf < 50 else 200.0 - 2.0 * qf
    vals = np.floor((BASE_TABLE * scale + 50.0) / 100.0)
    vals = np.clip(vals, 1, 255).astype(np.int64)
    return QuantTable(values=vals, quality_factor=qf)


def _dct_matrix() -> np.ndarray:
    n = BLOCK
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    M = np.cos((2 * i + 1) * k * np.pi / (2 * n))
    M[0] *= np.sqrt(1.0 / n)
    M[1:] *= np.sqrt(2.0 / n)
    return M


_DCT = _dct_matrix()


def _round_half_away(a: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.floor(np.abs(a) + 0.5)


def compress(y: np.ndarray, table: QuantTable) -> np.ndarray:
    """Block-DCT quantize/reconstruct each channel independently.

    Input and output are float images in [0, 1], shape (..., H, W).
    Borders are padded to 8-multiples by edge replication, then cropped.
    """
    a = np.asarray(y)
    H, W = a.shape[-2:]
    v = a.astype(np.float64) * 255.0 - 128.0
    ph = (-H) % BLOCK
    pw = (-W) % BLOCK
    if ph or pw:
        widths = [(0, 0)] * (v.ndim - 2) + [(0, ph), (0, pw)]
        v = np.pad(v, widths, mode="edge")
    Hb, Wb = v.shape[-2] // BLOCK, v.shape[-1] // BLOCK
    lead = v.shape[:-2]
    blocks = v.reshape(*lead, Hb, BLOCK, Wb, BLOCK)
    blocks = np.moveaxis(blocks, -3, -2)              # (..., Hb, Wb, 8, 8)
    coef = _DCT @ blocks @ _DCT.T
    q = _round_half_away(coef / table.values)
    rec = _DCT.T @ (q * table.values) @ _DCT
    rec = np.moveaxis(rec, -2, -3).reshape(*lead, Hb * BLOCK, Wb * BLOCK)
    rec = rec[..., :H, :W]
    out = np.clip(rec + 128.0, 0.0, 255.0) / 255.0
    return out.astype(a.dtype)


def downsample(x: np.ndarray, s: int) -> np.ndarray:
    """Bicubic down-sampling by an integer factor; dims must divide by s."""
    H, W = x.shape[-2:]
    if H % s or W % s:
        raise ValueError(f"dims {H}x{W} not divisible by scale {s}; crop first")
    return resize_array(x, H // s, W // s)


def make_triple(x: np.ndarray, s: int, qf: int) -> TrainingTriple:
    """Crop to an s-multiple, down-sample, compress; the (x, y, z) triple."""
    H, W = x.shape[-2:]
    Hc, Wc = H - H % s, W - W % s
    if Hc < s * BLOCK or Wc < s * BLOCK:
        raise ValueError(
            f"image {H}x{W} too small for scale {s}: needs at least "
            f"{s * BLOCK} pixels per side after cropping")
    xc = np.ascontiguousarray(x[..., :Hc, :Wc])
    y = downsample(xc, s)
    y = np.clip(y, 0.0, 1.0)
    z = compress(y, build_quant_table(qf))
    return TrainingTriple(x=xc, y=y, z=z, scale=s, qf=qf)


# -- image and manifest I/O -------------------------------------------------

def load_image(path: str) -> np.ndarray:
    """Read an 8-bit PNG/PPM image as a (3, H, W) float array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr.transpose(2, 0, 1)


def save_image(arr: np.ndarray, path: str) -> None:
    """Write a (C, H, W) or (H, W) float array in [0, 1] as 8-bit PNG/PPM."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 3:
        a = a.transpose(1, 2, 0)
        if a.shape[2] == 1:
            a = a[:, :, 0]
    u8 = np.clip(np.floor(a * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(u8).save(path)


@dataclass
class ManifestRow:
    hr_path: str
    lr_clean_path: str
    lr_compressed_path: str
    scale: int
    qf: int
    codec_id: str


class ManifestError(ValueError):
    pass


def write_manifest(rows: list[ManifestRow], path: str) -> None:
    """One tab-separated line per triple; paths relative to the manifest."""
    with open(path, "w") as f:
        for r in rows:
            f.write(f"{r.hr_path}\t{r.lr_clean_path}\t{r.lr_compressed_path}"
                    f"\t{r.scale}\t{r.qf}\t{r.codec_id}\n")


def read_manifest(path: str) -> list[ManifestRow]:
    base = os.path.dirname(os.path.abspath(path))
    rows = []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ManifestError(f"{path}:{ln}: expected 6 tab-separated fields, got {len(parts)}")
            try:
                scale, qf = int(parts[3]), int(parts[4])
            except ValueError as e:
                raise ManifestError(f"{path}:{ln}: bad scale/qf: {e}") from None
            rows.append(ManifestRow(
                hr_path=os.path.join(base, parts[0]),
                lr_clean_path=os.path.join(base, parts[1]),
                lr_compressed_path=os.path.join(base, parts[2]),
                scale=scale, qf=qf, codec_id=parts[5]))
    return rows


def load_triple(row: ManifestRow) -> TrainingTriple:
    return TrainingTriple(
        x=load_image(row.hr_path),
        y=load_image(row.lr_clean_path),
        z=load_image(row.lr_compressed_path),
        scale=row.scale, qf=row.qf, codec_id=row.codec_id)
