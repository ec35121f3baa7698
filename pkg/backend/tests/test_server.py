"""Conformance tests for the reference backend, driven over raw pipes."""

import struct
import subprocess
import sys

import numpy as np

HEADER = struct.Struct("<4sBBI")
SR_HEAD = struct.Struct("<BBII")
HELLO, CAPS, SR_REQUEST, SR_RESPONSE, ERROR = 1, 2, 3, 4, 5


def frame(msg_type, payload=b""):
    return HEADER.pack(b"CSSR", 1, msg_type, len(payload)) + payload


def sr_request(scale, planes):
    channels, height, width = planes.shape
    head = SR_HEAD.pack(scale, channels, width, height)
    return frame(SR_REQUEST, head + np.ascontiguousarray(planes, "<f4").tobytes())


class Server:
    def __init__(self, *args):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "srbackend", *args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )

    def send(self, blob):
        self.proc.stdin.write(blob)
        self.proc.stdin.flush()

    def recv(self):
        header = self.proc.stdout.read(HEADER.size)
        assert len(header) == HEADER.size, "server closed unexpectedly"
        magic, version, msg_type, length = HEADER.unpack(header)
        assert magic == b"CSSR" and version == 1
        payload = self.proc.stdout.read(length) if length else b""
        assert len(payload) == length
        return msg_type, payload

    def ask(self, blob):
        self.send(blob)
        return self.recv()

    def shutdown(self):
        self.proc.stdin.close()
        code = self.proc.wait(timeout=10)
        self.proc.stdout.close()
        return code

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()


def decode_response(payload):
    scale, channels, width, height = SR_HEAD.unpack_from(payload)
    assert len(payload) == SR_HEAD.size + 4 * width * height * channels
    data = np.frombuffer(payload, "<f4", offset=SR_HEAD.size)
    return scale, data.reshape(channels, height, width)


def reference_bicubic_axis(values, scale):
    """Direct per-position evaluation of the documented kernel convention."""
    n = len(values)
    out = []
    for i in range(n * scale):
        src = (i + 0.5) / scale - 0.5
        base = int(np.floor(src))
        acc, wsum = 0.0, 0.0
        for off in (-1, 0, 1, 2):
            x = abs(src - (base + off))
            if x <= 1:
                w = (1.5 * x - 2.5) * x * x + 1
            elif x < 2:
                w = ((-0.5 * x + 2.5) * x - 4) * x + 2
            else:
                w = 0.0
            acc += w * values[min(max(base + off, 0), n - 1)]
            wsum += w
        out.append(acc / wsum)
    return np.array(out)


class TestHandshake:
    def test_default_caps(self):
        with Server() as server:
            msg_type, payload = server.ask(frame(HELLO))
            assert msg_type == CAPS
            count = payload[0]
            scales = tuple(payload[1:1 + count])
            max_w, max_h = struct.unpack_from("<II", payload, 1 + count)
            assert scales == (2, 4)
            assert (max_w, max_h) == (4096, 4096)
            assert server.shutdown() == 0

    def test_custom_scales_and_max_dim(self):
        with Server("--scales", "3", "--max-dim", "256") as server:
            _, payload = server.ask(frame(HELLO))
            assert tuple(payload[1:2]) == (3,)
            assert struct.unpack_from("<II", payload, 2) == (256, 256)
            server.shutdown()


class TestUpscaling:
    def test_one_pixel_constant_dc(self):
        with Server() as server:
            server.ask(frame(HELLO))
            planes = np.full((1, 1, 1), 0.625, dtype=np.float32)
            msg_type, payload = server.ask(sr_request(2, planes))
            assert msg_type == SR_RESPONSE
            scale, data = decode_response(payload)
            assert scale == 2 and data.shape == (1, 2, 2)
            np.testing.assert_allclose(data, 0.625, atol=1e-6)
            server.shutdown()

    def test_bicubic_matches_direct_kernel_evaluation(self):
        rng = np.random.default_rng(13)
        row = rng.random(6).astype(np.float32)
        with Server() as server:
            server.ask(frame(HELLO))
            msg_type, payload = server.ask(sr_request(4, row[None, None, :]))
            assert msg_type == SR_RESPONSE
            _, data = decode_response(payload)
            np.testing.assert_allclose(data[0, 0], reference_bicubic_axis(row, 4),
                                       atol=1e-6)
            server.shutdown()

    def test_nearest_mode_replicates(self):
        with Server("--mode", "nearest") as server:
            server.ask(frame(HELLO))
            planes = np.arange(4, dtype=np.float32).reshape(1, 2, 2)
            _, payload = server.ask(sr_request(2, planes))
            _, data = decode_response(payload)
            np.testing.assert_array_equal(data[0], planes[0].repeat(2, 0).repeat(2, 1))
            server.shutdown()

    def test_deterministic_responses(self):
        rng = np.random.default_rng(3)
        planes = rng.random((3, 5, 4), dtype=np.float32)
        with Server() as server:
            server.ask(frame(HELLO))
            first = server.ask(sr_request(2, planes))
            second = server.ask(sr_request(2, planes))
            assert first == second
            server.shutdown()


class TestErrorPaths:
    def test_unsupported_scale(self):
        with Server() as server:
            server.ask(frame(HELLO))
            planes = np.zeros((1, 2, 2), dtype=np.float32)
            msg_type, payload = server.ask(sr_request(3, planes))
            assert msg_type == ERROR
            assert payload == b"unsupported scale 3"
            server.shutdown()

    def test_malformed_payload_then_keeps_serving(self):
        with Server() as server:
            server.ask(frame(HELLO))
            lying = SR_HEAD.pack(2, 1, 8, 8) + b"\x00" * 16
            msg_type, payload = server.ask(frame(SR_REQUEST, lying))
            assert msg_type == ERROR and b"malformed" in payload
            # connection still usable afterwards
            planes = np.zeros((1, 2, 2), dtype=np.float32)
            msg_type, _ = server.ask(sr_request(2, planes))
            assert msg_type == SR_RESPONSE
            assert server.shutdown() == 0

    def test_unexpected_message_type_gets_error(self):
        with Server() as server:
            server.ask(frame(HELLO))
            msg_type, payload = server.ask(frame(SR_RESPONSE, b""))
            assert msg_type == ERROR and b"unexpected" in payload
            server.shutdown()

    def test_oversize_dimensions_rejected(self):
        with Server("--max-dim", "16") as server:
            server.ask(frame(HELLO))
            planes = np.zeros((1, 1, 32), dtype=np.float32)
            msg_type, payload = server.ask(sr_request(2, planes))
            assert msg_type == ERROR and b"out of range" in payload
            server.shutdown()

    def test_eof_means_clean_exit(self):
        with Server() as server:
            server.ask(frame(HELLO))
            assert server.shutdown() == 0


class TestModelHook:
    def test_hook_file_drives_upscaling(self, tmp_path):
        hook = tmp_path / "hook.py"
        hook.write_text(
            "import numpy as np\n"
            "def upscale(data, scale):\n"
            "    return data.repeat(scale, axis=1).repeat(scale, axis=2)\n"
        )
        with Server("--mode", f"model:{hook}") as server:
            server.ask(frame(HELLO))
            planes = np.arange(4, dtype=np.float32).reshape(1, 2, 2)
            msg_type, payload = server.ask(sr_request(2, planes))
            assert msg_type == SR_RESPONSE
            _, data = decode_response(payload)
            np.testing.assert_array_equal(data[0], planes[0].repeat(2, 0).repeat(2, 1))
            server.shutdown()

    def test_hook_with_wrong_shape_yields_error_frame(self, tmp_path):
        hook = tmp_path / "bad_shape.py"
        hook.write_text(
            "def upscale(data, scale):\n"
            "    return data\n"
        )
        with Server("--mode", f"model:{hook}") as server:
            server.ask(frame(HELLO))
            planes = np.zeros((1, 2, 2), dtype=np.float32)
            msg_type, payload = server.ask(sr_request(2, planes))
            assert msg_type == ERROR and b"shape" in payload
            server.shutdown()

    def test_missing_hook_file_exits_before_handshake(self):
        proc = subprocess.run(
            [sys.executable, "-m", "srbackend", "--mode", "model:/no/such/file.py"],
            input=frame(HELLO),
            capture_output=True,
            timeout=30,
        )
        assert proc.returncode != 0
        assert proc.stdout == b""  # no CAPS ever sent
        assert b"does not exist" in proc.stderr

    def test_hook_without_upscale_function_rejected(self, tmp_path):
        hook = tmp_path / "empty.py"
        hook.write_text("x = 1\n")
        proc = subprocess.run(
            [sys.executable, "-m", "srbackend", "--mode", f"model:{hook}"],
            input=frame(HELLO),
            capture_output=True,
            timeout=30,
        )
        assert proc.returncode != 0
        assert b"upscale" in proc.stderr
