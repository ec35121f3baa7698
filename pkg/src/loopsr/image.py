"""Planar float32 image values plus deterministic 8-bit Netpbm I/O.

Images are immutable: the pixel buffer is a read-only float32 array of
shape (channels, height, width) with nominal range [0, 1]. Values outside
the range are legal (the refinement loop runs unclamped); NaN/Inf are not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ImageTooSmallError, PpmParseError

RGB = "rgb"
YCBCR = "ycbcr"
GRAY = "gray"

_COLOR_SPACES = {RGB, YCBCR, GRAY}


@dataclass(frozen=True)
class Image:
    """Immutable planar raster: data[channel, row, col], float32."""

    data: np.ndarray
    color_space: str

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ContractViolation(f"image data must be (c, h, w), got shape {arr.shape}")
        c, h, w = arr.shape
        if h < 1 or w < 1:
            raise ContractViolation(f"image dimensions must be >= 1, got {w}x{h}")
        if self.color_space not in _COLOR_SPACES:
            raise ContractViolation(f"unknown color space {self.color_space!r}")
        if c == 1:
            if self.color_space != GRAY:
                raise ContractViolation("1-channel images must be tagged gray")
        elif c == 3:
            if self.color_space == GRAY:
                raise ContractViolation("3-channel images cannot be tagged gray")
        else:
            raise ContractViolation(f"channel count must be 1 or 3, got {c}")
        if not np.isfinite(arr).all():
            raise ContractViolation("image contains NaN or Inf samples")
        # own the buffer: never freeze or alias a caller's writable array
        if arr.flags.writeable or not arr.flags.c_contiguous:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "Image":
        """Same color space, new pixels."""
        return Image(data, self.color_space)

    def same_geometry(self, other: "Image") -> bool:
        return self.shape == other.shape and self.color_space == other.color_space


@dataclass(frozen=True)
class DiffMap:
    """Per-pixel absolute difference of two same-shaped images."""

    image: Image
    source_a: str = "a"
    source_b: str = "b"


def constant(value, width, height, channels=1, color_space=None) -> Image:
    """Constant image, handy for tests and demos."""
    if color_space is None:
        color_space = GRAY if channels == 1 else RGB
    arr = np.full((channels, height, width), value, dtype=np.float32)
    return Image(arr, color_space)


# --- Netpbm (binary P5/P6, maxval 255) ---------------------------------

def _read_token(buf: bytes, pos: int):
    """Next header token, skipping whitespace and # comments."""
    n = len(buf)
    while pos < n:
        b = buf[pos]
        if b in b" \t\r\n\x0b\x0c":
            pos += 1
        elif b == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise PpmParseError("unexpected end of header", pos)
    start = pos
    while pos < n and buf[pos] not in b" \t\r\n\x0b\x0c#":
        pos += 1
    return buf[start:pos], pos


def load_ppm(data: bytes) -> Image:
    """Parse binary PPM (P6) or PGM (P5) bytes into a float image.

    Each 8-bit sample v maps to v/255. Maxval must be 255.
    """
    data = bytes(data)
    if len(data) < 2:
        raise PpmParseError("not a Netpbm payload", 0)
    magic = data[:2]
    if magic == b"P6":
        channels = 3
    elif magic == b"P5":
        channels = 1
    else:
        raise PpmParseError(f"bad magic {magic!r}", 0)
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise PpmParseError(f"non-numeric header field {tok!r}", pos - len(tok)) from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PpmParseError(f"bad dimensions {width}x{height}", 2)
    if maxval != 255:
        raise PpmParseError(f"unsupported maxval {maxval}", pos - len(str(maxval)))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or data[pos] not in b" \t\r\n\x0b\x0c":
        raise PpmParseError("missing whitespace after maxval", pos)
    pos += 1
    need = width * height * channels
    raster = data[pos:pos + need]
    if len(raster) < need:
        raise PpmParseError(
            f"truncated raster: need {need} bytes, have {len(raster)}", pos + len(raster)
        )
    samples = np.frombuffer(raster, dtype=np.uint8).astype(np.float32) / np.float32(255.0)
    # interleaved rows on the wire -> planar in memory
    arr = samples.reshape(height, width, channels).transpose(2, 0, 1)
    return Image(arr, RGB if channels == 3 else GRAY)


def quantize_u8(arr: np.ndarray) -> np.ndarray:
    """Clamp to [0,1] then round half away from zero onto the 8-bit grid."""
    clipped = np.clip(arr.astype(np.float64), 0.0, 1.0)
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)


def save_ppm(img: Image) -> bytes:
    """Serialize to binary P6/P5 with a fixed, bit-reproducible header."""
    if img.color_space == YCBCR:
        raise ContractViolation("convert YCbCr to RGB before saving")
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + b"\n" + f"{img.width} {img.height}".encode() + b"\n255\n"
    u8 = quantize_u8(img.data)
    raster = u8.transpose(1, 2, 0).tobytes()
    return header + raster


# --- color conversion ----------------------------------------------------

def rgb_to_ycbcr(img: Image) -> Image:
    """Full-range BT.601 on [0,1]: Cb=(B-Y)/1.772+0.5, Cr=(R-Y)/1.402+0.5."""
    if img.color_space != RGB:
        raise ContractViolation(f"expected rgb input, got {img.color_space}")
    r, g, b = img.data.astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = (b - y) / 1.772 + 0.5
    cr = (r - y) / 1.402 + 0.5
    return Image(np.stack([y, cb, cr]).astype(np.float32), YCBCR)


def ycbcr_to_rgb(img: Image) -> Image:
    """Exact algebraic inverse of rgb_to_ycbcr; no clamping."""
    if img.color_space != YCBCR:
        raise ContractViolation(f"expected ycbcr input, got {img.color_space}")
    y, cb, cr = img.data.astype(np.float64)
    r = y + 1.402 * (cr - 0.5)
    b = y + 1.772 * (cb - 0.5)
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return Image(np.stack([r, g, b]).astype(np.float32), RGB)


def gray_from(img: Image) -> Image:
    """Luma plane of an RGB image, or the image itself when already gray."""
    if img.color_space == GRAY:
        return img
    if img.color_space == RGB:
        return Image(rgb_to_ycbcr(img).data[:1], GRAY)
    return Image(img.data[:1], GRAY)


# --- geometry and pixel-wise utilities -----------------------------------

def crop_to_multiple(img: Image, m: int) -> Image:
    """Top-left crop so both dimensions divide by m; identity if they already do."""
    if m < 1:
        raise ContractViolation(f"factor must be >= 1, got {m}")
    w = (img.width // m) * m
    h = (img.height // m) * m
    if w == 0 or h == 0:
        raise ImageTooSmallError(
            f"{img.width}x{img.height} image cannot be cropped to a multiple of {m}"
        )
    if w == img.width and h == img.height:
        return img
    return img.with_data(img.data[:, :h, :w])


def abs_diff(a: Image, b: Image, source_a: str = "a", source_b: str = "b") -> DiffMap:
    """Per-sample |a - b| with the source identifiers attached."""
    if a.color_space == YCBCR:
        raise ContractViolation("difference maps are defined for rgb/gray images")
    if not a.same_geometry(b):
        raise ContractViolation(
            f"shape mismatch: {a.shape}/{a.color_space} vs {b.shape}/{b.color_space}"
        )
    return DiffMap(a.with_data(np.abs(a.data - b.data)), source_a, source_b)
