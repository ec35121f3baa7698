"""Built-in upscalers: pixel replication and Catmull-Rom bicubic.

Conventions match the protocol host's documented kernel so that
cross-implementation tests agree tightly: output center i samples source
coordinate (i + 0.5) / scale - 0.5, kernel a = -0.5, edges clamped.
"""

import numpy as np


def catmull_rom(x):
    ax = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    a = ax[near]
    out[near] = (1.5 * a - 2.5) * a * a + 1.0
    a = ax[far]
    out[far] = ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    return out


def _axis_taps(n_in, scale):
    src = (np.arange(n_in * scale) + 0.5) / scale - 0.5
    base = np.floor(src).astype(np.int64)
    offsets = np.array([-1, 0, 1, 2])
    idx = np.clip(base[:, None] + offsets[None, :], 0, n_in - 1)
    weights = catmull_rom(src[:, None] - base[:, None] - offsets[None, :])
    weights /= weights.sum(axis=1, keepdims=True)
    return idx, weights


def upscale_nearest(planes, scale):
    return planes.repeat(scale, axis=1).repeat(scale, axis=2)


def upscale_bicubic(planes, scale):
    """Separable gather: rows then columns, float64 accumulation."""
    arr = planes.astype(np.float64)
    idx_h, w_h = _axis_taps(arr.shape[1], scale)
    arr = (arr[:, idx_h, :] * w_h[None, :, :, None]).sum(axis=2)
    idx_w, w_w = _axis_taps(arr.shape[2], scale)
    arr = (arr[:, :, idx_w] * w_w[None, None, :, :]).sum(axis=3)
    return arr.astype(np.float32)
