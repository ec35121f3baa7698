"""Reference quality metrics: PSNR and windowed SSIM.

Both metrics clamp their inputs to [0, 1] first and are computed in
float64. PSNR pools the MSE over every sample of every channel; SSIM is
evaluated per channel with an 11-tap Gaussian window (sigma 1.5) in
valid-convolution mode and the per-channel means are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import ContractViolation, MetricError
from .image import Image
from .resample import BICUBIC, resample_planar, upsample_matrix


@dataclass(frozen=True)
class SsimParams:
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0


def _check_pair(a: Image, b: Image):
    if a.shape != b.shape:
        raise ContractViolation(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a: Image, b: Image, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); +inf when the images are identical."""
    _check_pair(a, b)
    if not peak > 0:
        raise ContractViolation(f"peak must be > 0, got {peak}")
    x = np.clip(a.data.astype(np.float64), 0.0, 1.0)
    y = np.clip(b.data.astype(np.float64), 0.0, 1.0)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """2-D Gaussian weights, truncated to size x size and normalized to sum 1."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: Image, b: Image, params: SsimParams = SsimParams()) -> float:
    """Mean structural similarity over the valid window positions."""
    _check_pair(a, b)
    size = params.window_size
    if min(a.width, a.height) < size:
        raise MetricError(
            f"image {a.width}x{a.height} smaller than the {size}-tap ssim window"
        )
    win = gaussian_window(size, params.sigma)
    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    scores = []
    for ch in range(a.channels):
        x = np.clip(a.data[ch].astype(np.float64), 0.0, 1.0)
        y = np.clip(b.data[ch].astype(np.float64), 0.0, 1.0)
        mu_x = convolve2d(x, win, mode="valid")
        mu_y = convolve2d(y, win, mode="valid")
        xx = convolve2d(x * x, win, mode="valid")
        yy = convolve2d(y * y, win, mode="valid")
        xy = convolve2d(x * y, win, mode="valid")
        var_x = xx - mu_x * mu_x
        var_y = yy - mu_y * mu_y
        cov = xy - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))


def upsample_for_metric(lowres: Image, target_w: int, target_h: int) -> Image:
    """Bicubic upsample to the reference size for like-for-like metrics.

    Target dimensions must be integer multiples of the source dimensions.
    """
    if target_w == lowres.width and target_h == lowres.height:
        return lowres
    if target_w % lowres.width or target_h % lowres.height:
        raise ContractViolation(
            f"target {target_w}x{target_h} is not an integer multiple of "
            f"{lowres.width}x{lowres.height}"
        )
    fw = target_w // lowres.width
    fh = target_h // lowres.height
    mat_h = upsample_matrix(lowres.height, fh, BICUBIC)
    mat_w = upsample_matrix(lowres.width, fw, BICUBIC)
    return lowres.with_data(resample_planar(lowres.data, mat_h, mat_w))
