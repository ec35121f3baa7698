"""Framed binary protocol for delegating the upscale unit to a child process.

Frame layout (all integers little-endian):

    magic   4 bytes  "CSSR"
    version u8       1
    type    u8       1=HELLO 2=CAPS 3=SR_REQUEST 4=SR_RESPONSE 5=ERROR
    length  u32      payload byte count
    payload length bytes

CAPS payload: u8 scale count, that many u8 scales, u32 max width, u32 max
height. SR_REQUEST/SR_RESPONSE payload: u8 scale, u8 channels, u32 width,
u32 height, then width*height*channels float32 samples, planar
channel-major then row-major. ERROR payload: UTF-8 message.

The client owns a child process, speaks over its stdin/stdout, and allows
one request in flight. See docs/protocol.md for golden byte dumps.
"""

from __future__ import annotations

import os
import select
import struct
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    BackendError,
    BackendTimeoutError,
    BrokenBackendError,
    ConfigError,
    ContractViolation,
    HandshakeError,
    ProtocolError,
)
from .image import GRAY, RGB, Image

MAGIC = b"CSSR"
VERSION = 1
HEADER = struct.Struct("<4sBBI")

MSG_HELLO = 1
MSG_CAPS = 2
MSG_SR_REQUEST = 3
MSG_SR_RESPONSE = 4
MSG_ERROR = 5
MSG_TYPES = (MSG_HELLO, MSG_CAPS, MSG_SR_REQUEST, MSG_SR_RESPONSE, MSG_ERROR)

MAX_PAYLOAD = 1 << 31


def encode_frame(msg_type: int, payload: bytes = b"") -> bytes:
    if msg_type not in MSG_TYPES:
        raise ProtocolError(f"unknown message type {msg_type}")
    return HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def decode_header(header: bytes) -> tuple[int, int]:
    """Validate a 10-byte header; returns (msg_type, payload_len)."""
    magic, version, msg_type, length = HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if msg_type not in MSG_TYPES:
        raise ProtocolError(f"unknown message type {msg_type}")
    if length >= MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit")
    return msg_type, length


def decode_frame(data: bytes) -> tuple[int, bytes]:
    """Split one complete frame held in memory; round-trips encode_frame."""
    if len(data) < HEADER.size:
        raise ProtocolError(f"short frame: {len(data)} bytes")
    msg_type, length = decode_header(data[:HEADER.size])
    payload = data[HEADER.size:HEADER.size + length]
    if len(payload) != length or len(data) != HEADER.size + length:
        raise ProtocolError(f"frame length mismatch: declared {length}")
    return msg_type, payload


@dataclass(frozen=True)
class Caps:
    scales: tuple
    max_width: int
    max_height: int


def encode_caps(caps: Caps) -> bytes:
    body = struct.pack("<B", len(caps.scales))
    body += bytes(caps.scales)
    body += struct.pack("<II", caps.max_width, caps.max_height)
    return body


def decode_caps(payload: bytes) -> Caps:
    if len(payload) < 1:
        raise ProtocolError("empty CAPS payload")
    count = payload[0]
    need = 1 + count + 8
    if len(payload) != need:
        raise ProtocolError(f"CAPS payload should be {need} bytes, got {len(payload)}")
    scales = tuple(payload[1:1 + count])
    max_w, max_h = struct.unpack_from("<II", payload, 1 + count)
    return Caps(scales, max_w, max_h)


_SR_HEAD = struct.Struct("<BBII")


def encode_sr_payload(scale: int, channels: int, width: int, height: int,
                      data: np.ndarray) -> bytes:
    samples = np.ascontiguousarray(data, dtype="<f4")
    if samples.size != width * height * channels:
        raise ProtocolError("sample count does not match declared dimensions")
    return _SR_HEAD.pack(scale, channels, width, height) + samples.tobytes()


def decode_sr_payload(payload: bytes):
    """Returns (scale, channels, width, height, float32 planar array)."""
    if len(payload) < _SR_HEAD.size:
        raise ProtocolError("short SR payload")
    scale, channels, width, height = _SR_HEAD.unpack_from(payload)
    need = _SR_HEAD.size + 4 * width * height * channels
    if len(payload) != need:
        raise ProtocolError(f"SR payload should be {need} bytes, got {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f4", offset=_SR_HEAD.size)
    return scale, channels, width, height, flat.reshape(channels, height, width)


class BackendHandle:
    """Client side of the protocol: spawn, handshake, request, shut down.

    Single in-flight request; not safe for concurrent callers. Use one
    handle per worker.
    """

    def __init__(self, command, handshake_timeout: float = 10.0,
                 request_timeout: float = 120.0):
        self.command = list(command)
        self.request_timeout = request_timeout
        self._busy = False
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise BackendError(f"cannot spawn backend {self.command}: {exc}") from exc
        try:
            self._send(MSG_HELLO, b"")
            msg_type, payload = self._recv(handshake_timeout)
            if msg_type != MSG_CAPS:
                raise ProtocolError(f"expected CAPS after HELLO, got type {msg_type}")
            self.caps = decode_caps(payload)
        except BackendError as exc:
            self.close()
            if isinstance(exc, (ProtocolError, BackendTimeoutError)):
                raise HandshakeError(str(exc)) from exc
            raise

    # -- raw I/O ----------------------------------------------------------

    def _send(self, msg_type: int, payload: bytes):
        if self._proc.poll() is not None:
            raise BrokenBackendError(
                f"backend exited with code {self._proc.returncode}"
            )
        try:
            self._proc.stdin.write(encode_frame(msg_type, payload))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BrokenBackendError(f"backend pipe closed: {exc}") from exc

    def _read_exact(self, n: int, deadline: float) -> bytes:
        fd = self._proc.stdout.fileno()
        chunks = bytearray()
        while len(chunks) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BackendTimeoutError(
                    f"backend silent for {self.request_timeout}s "
                    f"({len(chunks)}/{n} bytes received)"
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, n - len(chunks))
            if not chunk:
                code = self._proc.poll()
                raise BrokenBackendError(
                    f"backend closed its stream mid-frame (exit code {code})"
                )
            chunks.extend(chunk)
        return bytes(chunks)

    def _recv(self, timeout: float) -> tuple[int, bytes]:
        deadline = time.monotonic() + timeout
        header = self._read_exact(HEADER.size, deadline)
        msg_type, length = decode_header(header)
        payload = self._read_exact(length, deadline) if length else b""
        return msg_type, payload

    # -- requests ---------------------------------------------------------

    def super_resolve(self, img: Image, scale: int) -> Image:
        """Delegate one upscale; validates the response shape."""
        if img.color_space not in (RGB, GRAY):
            raise ContractViolation("backend wire format carries rgb or gray only")
        if scale not in self.caps.scales:
            raise ConfigError(
                f"scale {scale} not advertised by backend (caps: {self.caps.scales})"
            )
        if img.width > self.caps.max_width or img.height > self.caps.max_height:
            raise ConfigError(
                f"{img.width}x{img.height} exceeds backend limit "
                f"{self.caps.max_width}x{self.caps.max_height}"
            )
        if self._busy:
            raise ContractViolation("handle already has a request in flight")
        self._busy = True
        try:
            return self._roundtrip(img, scale)
        except ProtocolError:
            # response stream state is unknown; abandon the connection
            self.close()
            raise
        finally:
            self._busy = False

    def _roundtrip(self, img: Image, scale: int) -> Image:
        payload = encode_sr_payload(
            scale, img.channels, img.width, img.height, img.data
        )
        self._send(MSG_SR_REQUEST, payload)
        msg_type, body = self._recv(self.request_timeout)
        if msg_type == MSG_ERROR:
            raise BackendError(f"backend error: {body.decode('utf-8', 'replace')}")
        if msg_type != MSG_SR_RESPONSE:
            raise ProtocolError(f"expected SR_RESPONSE, got type {msg_type}")
        rscale, channels, width, height, data = decode_sr_payload(body)
        if (rscale, channels) != (scale, img.channels):
            raise ProtocolError(
                f"response scale/channels {rscale}/{channels} do not match request"
            )
        if (width, height) != (img.width * scale, img.height * scale):
            raise ProtocolError(
                f"response {width}x{height}, expected "
                f"{img.width * scale}x{img.height * scale}"
            )
        return Image(data, img.color_space)

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        for stream in (proc.stdin, proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass
        try:
            proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
