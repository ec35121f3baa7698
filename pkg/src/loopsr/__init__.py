"""Closed-loop feedback refinement for compressed-image super-resolution.

A small numpy/scipy library around one idea: restoring a downsampled,
lossily compressed image is better done in a loop. The open-loop pipeline
(downsample, compress, upscale) produces an initial reconstruction; a
negative-feedback iteration then nudges the estimate until re-degrading
it reproduces that reconstruction.
"""

__version__ = "0.1.0"

from .errors import (
    BackendError,
    ConfigError,
    ContractViolation,
    DivergenceError,
    LoopsrError,
    MetricError,
    PpmParseError,
)
from .image import (
    DiffMap,
    Image,
    abs_diff,
    constant,
    crop_to_multiple,
    gray_from,
    load_ppm,
    rgb_to_ycbcr,
    save_ppm,
    ycbcr_to_rgb,
)
from .ops import (
    CompressOp,
    DownsampleOp,
    OperatorChain,
    SrOp,
    apply_chain,
    compress_roundtrip,
    degrade,
    downsample,
    super_resolve,
)
from .feedback import (
    LoopConfig,
    LoopTrace,
    SerialResult,
    reconstruct,
    refine,
    residual,
    serial_pipeline,
)
from .metrics import SsimParams, psnr, ssim, upsample_for_metric
from .protocol import BackendHandle, Caps

__all__ = [
    "BackendError",
    "BackendHandle",
    "Caps",
    "CompressOp",
    "ConfigError",
    "ContractViolation",
    "DiffMap",
    "DivergenceError",
    "DownsampleOp",
    "Image",
    "LoopConfig",
    "LoopTrace",
    "LoopsrError",
    "MetricError",
    "OperatorChain",
    "PpmParseError",
    "SerialResult",
    "SrOp",
    "SsimParams",
    "abs_diff",
    "apply_chain",
    "compress_roundtrip",
    "constant",
    "crop_to_multiple",
    "degrade",
    "downsample",
    "gray_from",
    "load_ppm",
    "psnr",
    "reconstruct",
    "refine",
    "residual",
    "rgb_to_ycbcr",
    "save_ppm",
    "serial_pipeline",
    "ssim",
    "super_resolve",
    "upsample_for_metric",
    "ycbcr_to_rgb",
]
