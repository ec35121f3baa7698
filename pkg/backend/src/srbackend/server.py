"""Reference server side of the upscaler wire protocol.

Speaks framed binary messages on stdin/stdout (see the protocol document
shipped with the host project): HELLO is answered with CAPS, each
SR_REQUEST with exactly one SR_RESPONSE or ERROR. Malformed requests get
an ERROR frame and the loop keeps serving; end-of-file on stdin means a
clean exit.

Modes: bicubic (default), nearest, or model:<path> where <path> is a
Python file providing the model hook -- a single function

    upscale(data: np.ndarray, scale: int) -> np.ndarray

taking and returning a planar float32 (channels, height, width) array,
with output exactly scale times larger in both image dimensions. The
hook file is loaded once at startup; a missing file is a startup error
(nonzero exit before the handshake).
"""

from __future__ import annotations

import argparse
import importlib.util
import struct
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .resample import upscale_bicubic, upscale_nearest

MAGIC = b"CSSR"
VERSION = 1
HEADER = struct.Struct("<4sBBI")
SR_HEAD = struct.Struct("<BBII")

MSG_HELLO = 1
MSG_CAPS = 2
MSG_SR_REQUEST = 3
MSG_SR_RESPONSE = 4
MSG_ERROR = 5


@dataclass
class ServerConfig:
    mode: str = "bicubic"
    scales: tuple = (2, 4)
    max_dim: int = 4096
    model_hook: object = None


class FatalFraming(Exception):
    """Stream desync (bad magic/version); impossible to resync."""


def load_model_hook(path: str):
    """Import the hook file and return its upscale function."""
    hook_path = Path(path)
    if not hook_path.is_file():
        raise FileNotFoundError(f"model hook {path} does not exist")
    spec = importlib.util.spec_from_file_location("srbackend_model_hook", hook_path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not callable(getattr(module, "upscale", None)):
        raise AttributeError(f"model hook {path} defines no upscale() function")
    return module.upscale


def _read_exact(stream, n):
    chunks = bytearray()
    while len(chunks) < n:
        piece = stream.read(n - len(chunks))
        if not piece:
            return None if not chunks else bytes(chunks)
        chunks.extend(piece)
    return bytes(chunks)


def _read_frame(stream):
    header = _read_exact(stream, HEADER.size)
    if header is None:
        return None  # clean end of stream
    if len(header) < HEADER.size:
        raise FatalFraming("truncated frame header")
    magic, version, msg_type, length = HEADER.unpack(header)
    if magic != MAGIC or version != VERSION:
        raise FatalFraming(f"bad magic/version {magic!r}/{version}")
    payload = b""
    if length:
        payload = _read_exact(stream, length)
        if payload is None or len(payload) < length:
            raise FatalFraming("truncated payload")
    return msg_type, payload


def _send(stream, msg_type, payload=b""):
    stream.write(HEADER.pack(MAGIC, VERSION, msg_type, len(payload)))
    stream.write(payload)
    stream.flush()


def _caps_payload(cfg: ServerConfig) -> bytes:
    return (struct.pack("<B", len(cfg.scales)) + bytes(cfg.scales)
            + struct.pack("<II", cfg.max_dim, cfg.max_dim))


def _handle_request(payload: bytes, cfg: ServerConfig):
    """Returns (msg_type, payload) for the reply."""
    if len(payload) < SR_HEAD.size:
        return MSG_ERROR, b"short SR payload"
    scale, channels, width, height = SR_HEAD.unpack_from(payload)
    expected = SR_HEAD.size + 4 * width * height * channels
    if len(payload) != expected:
        return MSG_ERROR, (f"malformed payload: declared {width}x{height}x{channels}"
                           f" needs {expected} bytes, got {len(payload)}").encode()
    if scale not in cfg.scales:
        return MSG_ERROR, f"unsupported scale {scale}".encode()
    if channels not in (1, 3):
        return MSG_ERROR, f"unsupported channel count {channels}".encode()
    if width < 1 or height < 1 or width > cfg.max_dim or height > cfg.max_dim:
        return MSG_ERROR, f"dimensions {width}x{height} out of range".encode()

    planes = np.frombuffer(payload, dtype="<f4", offset=SR_HEAD.size)
    planes = planes.reshape(channels, height, width)
    try:
        if cfg.mode == "nearest":
            out = upscale_nearest(planes, scale)
        elif cfg.mode == "bicubic":
            out = upscale_bicubic(planes, scale)
        else:
            out = np.asarray(cfg.model_hook(planes, scale), dtype=np.float32)
    except Exception as exc:  # a broken hook must not kill the server
        return MSG_ERROR, f"upscaler failed: {exc}".encode()
    if out.shape != (channels, height * scale, width * scale):
        return MSG_ERROR, f"upscaler returned shape {out.shape}".encode()
    head = SR_HEAD.pack(scale, channels, width * scale, height * scale)
    body = np.ascontiguousarray(out, dtype="<f4").tobytes()
    return MSG_SR_RESPONSE, head + body


def serve(stdin, stdout, cfg: ServerConfig) -> int:
    """Request loop; returns the intended process exit code."""
    while True:
        try:
            frame = _read_frame(stdin)
        except FatalFraming as exc:
            _send(stdout, MSG_ERROR, str(exc).encode())
            return 1
        if frame is None:
            return 0
        msg_type, payload = frame
        if msg_type == MSG_HELLO:
            _send(stdout, MSG_CAPS, _caps_payload(cfg))
        elif msg_type == MSG_SR_REQUEST:
            reply_type, reply = _handle_request(payload, cfg)
            _send(stdout, reply_type, reply)
        else:
            _send(stdout, MSG_ERROR, f"unexpected message type {msg_type}".encode())


def parse_args(argv=None) -> ServerConfig:
    parser = argparse.ArgumentParser(
        prog="sr-backend",
        description="reference upscaling backend speaking the stdio protocol",
    )
    parser.add_argument("--mode", default="bicubic",
                        help="bicubic | nearest | model:<path to hook .py>")
    parser.add_argument("--scales", default="2,4",
                        help="comma-separated integer scale factors to advertise")
    parser.add_argument("--max-dim", type=int, default=4096,
                        help="largest accepted input width/height")
    args = parser.parse_args(argv)

    try:
        scales = tuple(int(s) for s in args.scales.split(",") if s)
    except ValueError:
        parser.error(f"bad --scales value {args.scales!r}")
    if not scales or any(not 1 <= s <= 255 for s in scales):
        parser.error("scales must be integers in 1..255")
    if args.max_dim < 1:
        parser.error("--max-dim must be >= 1")

    cfg = ServerConfig(scales=scales, max_dim=args.max_dim)
    if args.mode in ("bicubic", "nearest"):
        cfg.mode = args.mode
    elif args.mode.startswith("model:"):
        cfg.mode = "model"
        cfg.model_hook = load_model_hook(args.mode.split(":", 1)[1])
    else:
        parser.error(f"unknown mode {args.mode!r}")
    return cfg


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except (FileNotFoundError, AttributeError) as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 2
    return serve(sys.stdin.buffer, sys.stdout.buffer, cfg)


if __name__ == "__main__":
    sys.exit(main())
