"""The three interchangeable pipeline units: downsample, compress, upscale.

Every operator is deterministic and shape-contracted: downsampling divides
dimensions by its factor exactly, upscaling multiplies them exactly, the
compression round trip preserves them. None of them clamp; range policy
belongs to the refinement loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dctquant, resample
from .errors import ConfigError, ContractViolation
from .image import Image

DS_KINDS = ("nearest", "bicubic")
CP_KINDS = ("identity", "uniform", "dct")
SR_KINDS = ("nearest", "bilinear", "bicubic", "external")


@dataclass(frozen=True)
class DownsampleOp:
    kind: str = "bicubic"
    factor: int = 4

    def __post_init__(self):
        if self.kind not in DS_KINDS:
            raise ConfigError(f"downsample kind must be one of {DS_KINDS}, got {self.kind!r}")
        if self.factor < 1:
            raise ConfigError(f"downsample factor must be >= 1, got {self.factor}")


@dataclass(frozen=True)
class CompressOp:
    kind: str = "identity"
    step: float = 0.1            # uniform only
    quality: int = 50            # dct only
    chroma_subsample: bool = True

    def __post_init__(self):
        if self.kind not in CP_KINDS:
            raise ConfigError(f"compress kind must be one of {CP_KINDS}, got {self.kind!r}")
        if self.kind == "uniform" and not self.step > 0:
            raise ConfigError(f"quantization step must be > 0, got {self.step}")
        if self.kind == "dct" and not 1 <= self.quality <= 100:
            raise ConfigError(f"quality must be in 1..100, got {self.quality}")


@dataclass(frozen=True)
class SrOp:
    kind: str = "bicubic"
    factor: int = 4
    backend: Optional[object] = None  # live BackendHandle for kind="external"

    def __post_init__(self):
        if self.kind not in SR_KINDS:
            raise ConfigError(f"sr kind must be one of {SR_KINDS}, got {self.kind!r}")
        if self.factor < 1:
            raise ConfigError(f"sr factor must be >= 1, got {self.factor}")
        if self.kind == "external" and self.backend is None:
            raise ConfigError("external sr needs a backend handle")


@dataclass(frozen=True)
class OperatorChain:
    """A bound (downsample, compress, upscale) triple with matching factors."""

    ds: DownsampleOp
    cp: CompressOp
    sr: SrOp

    def __post_init__(self):
        if self.ds.factor != self.sr.factor:
            raise ConfigError(
                f"downsample factor {self.ds.factor} != sr factor {self.sr.factor}; "
                "the composite must be shape-preserving"
            )

    @property
    def factor(self) -> int:
        return self.ds.factor


def downsample(img: Image, op: DownsampleOp) -> Image:
    """Reduce resolution by op.factor; dimensions must divide exactly."""
    f = op.factor
    if f == 1:
        return img
    if img.width % f or img.height % f:
        raise ContractViolation(
            f"{img.width}x{img.height} not divisible by factor {f}; crop first"
        )
    if op.kind == "nearest":
        return img.with_data(resample.downsample_nearest(img.data, f))
    mat_h = resample.downsample_matrix(img.height, f, resample.BICUBIC)
    mat_w = resample.downsample_matrix(img.width, f, resample.BICUBIC)
    return img.with_data(resample.resample_planar(img.data, mat_h, mat_w))


def compress_roundtrip(img: Image, op: CompressOp) -> Image:
    """Lossy encode-decode round trip; resolution-preserving."""
    if op.kind == "identity":
        return img
    if op.kind == "uniform":
        step = np.float32(op.step)
        return img.with_data(np.round(img.data / step) * step)
    return dctquant.dct_roundtrip(img, op.quality, op.chroma_subsample)


def super_resolve(img: Image, op: SrOp) -> Image:
    """Increase resolution by op.factor."""
    f = op.factor
    if op.kind == "external":
        return op.backend.super_resolve(img, f)
    if f == 1:
        return img
    if op.kind == "nearest":
        return img.with_data(resample.upsample_nearest(img.data, f))
    kind = resample.BILINEAR if op.kind == "bilinear" else resample.BICUBIC
    mat_h = resample.upsample_matrix(img.height, f, kind)
    mat_w = resample.upsample_matrix(img.width, f, kind)
    return img.with_data(resample.resample_planar(img.data, mat_h, mat_w))


def degrade(img: Image, chain: OperatorChain) -> Image:
    """Low-resolution leg of the pipeline: compress(downsample(img))."""
    return compress_roundtrip(downsample(img, chain.ds), chain.cp)


def apply_chain(img: Image, chain: OperatorChain) -> Image:
    """Full re-degradation composite: upscale(compress(downsample(img)))."""
    return super_resolve(degrade(img, chain), chain.sr)
