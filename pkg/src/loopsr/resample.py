"""Separable integer-factor resampling with pixel-center alignment.

One coordinate convention everywhere: output center i maps to source
coordinate (i + 0.5) / f - 0.5 when upsampling and (i + 0.5) * f - 0.5
when downsampling. Bicubic is the Catmull-Rom kernel (a = -0.5); on
downsampling the kernel is stretched by the factor for antialiasing
(4f-tap support). Boundaries are edge-clamped. Misaligning these choices
between the downsample and upsample legs would inject a systematic shift
into the feedback residual, so nothing here is configurable.
"""

from __future__ import annotations

import numpy as np

NEAREST = "nearest"
BILINEAR = "bilinear"
BICUBIC = "bicubic"


def cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Catmull-Rom cubic (a = -0.5), zero outside |x| >= 2."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    a = ax[near]
    out[near] = (1.5 * a - 2.5) * a * a + 1.0
    a = ax[far]
    out[far] = ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    return out


def _weight_matrix(n_in: int, centers: np.ndarray, offsets: np.ndarray,
                   weights: np.ndarray) -> np.ndarray:
    """Dense (n_out, n_in) row-normalized matrix with edge-clamped taps."""
    idx = np.clip(centers[:, None] + offsets[None, :], 0, n_in - 1)
    mat = np.zeros((len(centers), n_in), dtype=np.float64)
    rows = np.repeat(np.arange(len(centers)), offsets.size)
    np.add.at(mat, (rows, idx.ravel()), weights.ravel())
    mat /= mat.sum(axis=1, keepdims=True)
    return mat


def upsample_matrix(n_in: int, factor: int, kind: str) -> np.ndarray:
    """(n_in*factor, n_in) interpolation matrix for one axis."""
    n_out = n_in * factor
    src = (np.arange(n_out) + 0.5) / factor - 0.5
    base = np.floor(src).astype(np.int64)
    t = src - base
    if kind == BILINEAR:
        offsets = np.array([0, 1])
        weights = np.stack([1.0 - t, t], axis=1)
    elif kind == BICUBIC:
        offsets = np.arange(-1, 3)
        weights = cubic_kernel(t[:, None] - offsets[None, :])
    else:
        raise ValueError(f"no upsample matrix for kind {kind!r}")
    return _weight_matrix(n_in, base, offsets, weights)


def downsample_matrix(n_in: int, factor: int, kind: str) -> np.ndarray:
    """(n_in/factor, n_in) reduction matrix with antialias-stretched kernel."""
    if n_in % factor:
        raise ValueError(f"axis length {n_in} not divisible by {factor}")
    n_out = n_in // factor
    src = (np.arange(n_out) + 0.5) * factor - 0.5
    if kind == BICUBIC:
        base = np.floor(src - 2.0 * factor).astype(np.int64) + 1
        offsets = np.arange(4 * factor)
        taps = base[:, None] + offsets[None, :]
        weights = cubic_kernel((taps - src[:, None]) / factor)
        return _weight_matrix(n_in, base, offsets, weights)
    raise ValueError(f"no downsample matrix for kind {kind!r}")


def _apply_axis(arr: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    out = np.tensordot(mat, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def resample_planar(arr: np.ndarray, mat_h: np.ndarray, mat_w: np.ndarray) -> np.ndarray:
    """Apply per-axis matrices to a planar (c, h, w) array; returns float32."""
    out = _apply_axis(arr.astype(np.float64), mat_h, 1)
    out = _apply_axis(out, mat_w, 2)
    return out.astype(np.float32)


def upsample_nearest(arr: np.ndarray, factor: int) -> np.ndarray:
    """Pixel replication; bit-exact."""
    return np.repeat(np.repeat(arr, factor, axis=1), factor, axis=2)


def downsample_nearest(arr: np.ndarray, factor: int) -> np.ndarray:
    """Top-left sample of each factor x factor block; bit-exact."""
    return arr[:, ::factor, ::factor]
