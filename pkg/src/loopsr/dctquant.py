"""Block-DCT coefficient quantization: the distortion core of baseline JPEG.

The refinement loop only ever consumes the decoded output of the
compressor, so no bitstream is produced: encode-decode collapses to an
8x8 orthonormal DCT, coefficient rounding against a quality-scaled
Annex-K table, and the inverse transform. Chroma can optionally be
4:2:0 box-subsampled before quantization and bilinearly restored after.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

from .errors import ConfigError, ContractViolation
from .image import GRAY, RGB, YCBCR, Image, rgb_to_ycbcr, ycbcr_to_rgb
from .resample import BILINEAR, resample_planar, upsample_matrix

LUMA_BASE_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)

CHROMA_BASE_TABLE = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.int64)

BLOCK = 8


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    """Classic libjpeg quality mapping: 5000/q below 50, 200-2q above."""
    if not 1 <= quality <= 100:
        raise ConfigError(f"quality must be in 1..100, got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.clip((base * scale + 50) // 100, 1, 255)


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Round the blocked DCT of one [-128,127]-scaled plane onto the table grid."""
    h, w = plane.shape
    ph = (-h) % BLOCK
    pw = (-w) % BLOCK
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    bh, bw = plane.shape[0] // BLOCK, plane.shape[1] // BLOCK
    blocks = plane.reshape(bh, BLOCK, bw, BLOCK).transpose(0, 2, 1, 3)
    coefs = dctn(blocks, axes=(-2, -1), norm="ortho")
    coefs = np.round(coefs / table) * table
    blocks = idctn(coefs, axes=(-2, -1), norm="ortho")
    out = blocks.transpose(0, 2, 1, 3).reshape(bh * BLOCK, bw * BLOCK)
    return out[:h, :w]


def _box_halve(plane: np.ndarray) -> np.ndarray:
    """2x2 box average, edge-replicating odd dimensions first."""
    h, w = plane.shape
    if h % 2 or w % 2:
        plane = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
    return 0.25 * (plane[0::2, 0::2] + plane[0::2, 1::2]
                   + plane[1::2, 0::2] + plane[1::2, 1::2])


def _bilinear_double(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    mat_h = upsample_matrix(plane.shape[0], 2, BILINEAR)
    mat_w = upsample_matrix(plane.shape[1], 2, BILINEAR)
    out = resample_planar(plane[None].astype(np.float32), mat_h, mat_w)[0]
    return out[:out_h, :out_w].astype(np.float64)


def dct_roundtrip(img: Image, quality: int, chroma_subsample: bool = True) -> Image:
    """Lossy encode-decode round trip at the given quality; shape-preserving.

    RGB input is converted to YCbCr and back internally; Gray quantizes a
    single plane with the luminance table. Output is not clamped.
    """
    if img.color_space not in (RGB, GRAY):
        raise ContractViolation("dct round trip expects rgb or gray input")
    qy = scaled_table(LUMA_BASE_TABLE, quality)
    if img.color_space == GRAY:
        plane = img.data[0].astype(np.float64) * 255.0 - 128.0
        out = (_quantize_plane(plane, qy) + 128.0) / 255.0
        return Image(out[None].astype(np.float32), GRAY)

    qc = scaled_table(CHROMA_BASE_TABLE, quality)
    ycbcr = rgb_to_ycbcr(img)
    h, w = img.height, img.width
    planes = []
    for ci in range(3):
        plane = ycbcr.data[ci].astype(np.float64) * 255.0 - 128.0
        table = qy if ci == 0 else qc
        if ci > 0 and chroma_subsample:
            small = _quantize_plane(_box_halve(plane), table)
            plane = _bilinear_double(small, h, w)
        else:
            plane = _quantize_plane(plane, table)
        planes.append((plane + 128.0) / 255.0)
    out = Image(np.stack(planes).astype(np.float32), YCBCR)
    return ycbcr_to_rgb(out)
