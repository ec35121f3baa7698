"""Benchmark harness: run the degrade/restore/refine protocol over a
directory of images and report per-image and mean PSNR/SSIM.

The harness is ground-truth-first: each input image is cropped to the
chain factor, degraded through the configured chain, restored serially,
then refined by the feedback loop; all three stages are scored against
the original. Outputs are a results.csv (stable schema, rows sorted by
image id), a summary.txt with means and the circular-minus-serial
increments, and a manifest.txt sufficient to reproduce the run.
"""

from __future__ import annotations

import math
import shlex
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import (
    BackendError,
    ConfigError,
    ContractViolation,
    LoopsrError,
    PpmParseError,
)
from .feedback import LoopConfig, refine, serial_pipeline
from .image import (
    Image,
    abs_diff,
    crop_to_multiple,
    gray_from,
    load_ppm,
    quantize_u8,
    save_ppm,
)
from .metrics import psnr, ssim, upsample_for_metric
from .ops import CompressOp, DownsampleOp, OperatorChain, SrOp
from . import protocol
from .protocol import BackendHandle

CSV_HEADER = ("image_id,psnr_compressed,ssim_compressed,psnr_serial,ssim_serial,"
              "psnr_circular,ssim_circular,residual_initial,residual_final,"
              "iterations_run,wall_ms")


@dataclass
class RunConfig:
    """Resolved harness configuration; validate() before use."""

    input_dir: str = ""
    output_dir: str = ""
    ds: str = "bicubic"
    cp: str = "dct:10"
    sr: str = "bicubic"
    scale: int = 4
    gain: float = 0.1
    iters: int = 10
    init: str = "serial"
    clamp_each_iter: bool = False
    metrics_mode: str = "rgb"
    metrics_8bit: bool = False
    shave: int = 0
    dump_images: bool = False
    dump_traces: bool = False
    jobs: int = 1
    request_timeout: float = 120.0

    def validate(self):
        self.parse_ds()
        self.parse_cp()
        self.parse_sr()
        self.loop_config()
        if self.metrics_mode not in ("rgb", "y"):
            raise ConfigError(f"metrics_mode must be rgb or y, got {self.metrics_mode!r}")
        if self.shave < 0:
            raise ConfigError(f"shave must be >= 0, got {self.shave}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        return self

    def parse_ds(self) -> DownsampleOp:
        return DownsampleOp(self.ds, self.scale)

    def parse_cp(self) -> CompressOp:
        spec = self.cp
        if spec == "identity":
            return CompressOp("identity")
        if spec.startswith("uniform:"):
            try:
                step = float(spec.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad uniform step in {spec!r}") from None
            return CompressOp("uniform", step=step)
        if spec.startswith("dct:"):
            body = spec.split(":", 1)[1]
            parts = body.split(",")
            try:
                quality = int(parts[0])
            except ValueError:
                raise ConfigError(f"bad dct quality in {spec!r}") from None
            sub = True
            for extra in parts[1:]:
                key, _, val = extra.partition("=")
                if key != "sub" or val.lower() not in ("true", "false"):
                    raise ConfigError(f"bad dct option {extra!r} in {spec!r}")
                sub = val.lower() == "true"
            return CompressOp("dct", quality=quality, chroma_subsample=sub)
        raise ConfigError(f"unknown compressor spec {spec!r}")

    def parse_sr(self):
        """Returns (kind, backend command list or None)."""
        if self.sr.startswith("external:"):
            command = shlex.split(self.sr.split(":", 1)[1])
            if not command:
                raise ConfigError("external sr needs a command line")
            return "external", command
        if self.sr in ("nearest", "bilinear", "bicubic"):
            return self.sr, None
        raise ConfigError(f"unknown sr spec {self.sr!r}")

    def loop_config(self) -> LoopConfig:
        init, seed = self.init, 0
        if init.startswith("random:"):
            try:
                seed = int(init.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad random seed in {self.init!r}") from None
            init = "random"
        return LoopConfig(
            gain=self.gain,
            iterations=self.iters,
            init=init,
            seed=seed,
            clamp_each_iter=self.clamp_each_iter,
        )

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


@dataclass
class ResultRow:
    image_id: str
    psnr_compressed: float
    ssim_compressed: float
    psnr_serial: float
    ssim_serial: float
    psnr_circular: float
    ssim_circular: float
    residual_initial: float
    residual_final: float
    iterations_run: int
    wall_ms: float

    def csv_line(self) -> str:
        return ",".join([
            self.image_id,
            _fmt_db(self.psnr_compressed),
            _fmt_score(self.ssim_compressed),
            _fmt_db(self.psnr_serial),
            _fmt_score(self.ssim_serial),
            _fmt_db(self.psnr_circular),
            _fmt_score(self.ssim_circular),
            f"{self.residual_initial:.9g}",
            f"{self.residual_final:.9g}",
            str(self.iterations_run),
            f"{self.wall_ms:.3f}",
        ])


@dataclass
class Summary:
    rows: list
    skipped: list
    mean_psnr: dict
    mean_ssim: dict
    psnr_increment: float
    ssim_increment: float

    def text(self) -> str:
        lines = [
            f"images {len(self.rows)}",
            f"skipped {len(self.skipped)}",
        ]
        for method in ("compressed", "serial", "circular"):
            lines.append(f"mean_psnr_{method} {_fmt_db_short(self.mean_psnr[method])}")
            lines.append(f"mean_ssim_{method} {self.mean_ssim[method]:.4f}")
        lines.append(f"psnr_increment {self.psnr_increment:+.2f}")
        lines.append(f"ssim_increment {self.ssim_increment:+.4f}")
        return "\n".join(lines) + "\n"


def _fmt_db(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6f}"


def _fmt_db_short(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.2f}"


def _fmt_score(v: float) -> str:
    return f"{v:.6f}"


def _increment(circular: float, serial: float) -> float:
    if math.isinf(circular) and math.isinf(serial) and circular == serial:
        return 0.0
    return circular - serial


class _MetricPair:
    """Applies the metric protocol options (y-only, shave, 8-bit grid)."""

    def __init__(self, cfg: RunConfig):
        self.mode = cfg.metrics_mode
        self.shave = cfg.shave
        self.to_8bit = cfg.metrics_8bit

    def _prep(self, img: Image) -> Image:
        if self.mode == "y":
            img = gray_from(img)
        if self.shave:
            s = self.shave
            if img.width <= 2 * s or img.height <= 2 * s:
                raise ContractViolation(f"shave {s} eats the whole image")
            img = img.with_data(img.data[:, s:-s, s:-s])
        if self.to_8bit:
            img = img.with_data(quantize_u8(img.data).astype(np.float32) / np.float32(255.0))
        return img

    def score(self, result: Image, reference: Image):
        a, b = self._prep(result), self._prep(reference)
        return psnr(a, b), ssim(a, b)


class SkippedImage(LoopsrError):
    """Input file could not be loaded; recorded, not fatal."""


def discover_inputs(input_dir) -> list:
    directory = Path(input_dir)
    if not directory.is_dir():
        raise ConfigError(f"input directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in (".ppm", ".pgm") and p.is_file())
    return files


def process_image(path: Path, cfg: RunConfig, chain: OperatorChain,
                  dump_dir: Optional[Path] = None,
                  trace_dir: Optional[Path] = None):
    """Run the full protocol on one image; returns (ResultRow, LoopTrace)."""
    start = time.perf_counter()
    try:
        hires = load_ppm(path.read_bytes())
    except (OSError, PpmParseError) as exc:
        raise SkippedImage(f"{path.name}: {exc}") from exc
    try:
        hires = crop_to_multiple(hires, chain.factor)
    except LoopsrError as exc:
        raise SkippedImage(f"{path.name}: {exc}") from exc

    serial = serial_pipeline(hires, chain)
    want_reference = cfg.dump_traces or trace_dir is not None
    refined, trace = refine(
        serial.restored, chain, cfg.loop_config(),
        reference=hires if want_reference else None,
    )

    compressed_up = upsample_for_metric(serial.compressed, hires.width, hires.height)
    scorer = _MetricPair(cfg)
    psnr_c, ssim_c = scorer.score(compressed_up, hires)
    psnr_s, ssim_s = scorer.score(serial.restored, hires)
    psnr_r, ssim_r = scorer.score(refined, hires)

    row = ResultRow(
        image_id=path.stem,
        psnr_compressed=psnr_c, ssim_compressed=ssim_c,
        psnr_serial=psnr_s, ssim_serial=ssim_s,
        psnr_circular=psnr_r, ssim_circular=ssim_r,
        residual_initial=trace.residual_l2[0] if trace.residual_l2 else 0.0,
        residual_final=trace.final_residual_l2,
        iterations_run=trace.iterations_run,
        wall_ms=(time.perf_counter() - start) * 1000.0,
    )

    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        stem = path.stem
        (dump_dir / f"{stem}_compressed_up.ppm").write_bytes(save_ppm(compressed_up))
        (dump_dir / f"{stem}_serial.ppm").write_bytes(save_ppm(serial.restored))
        (dump_dir / f"{stem}_circular.ppm").write_bytes(save_ppm(refined))
        diff_s = abs_diff(serial.restored, hires, f"{stem}_serial", stem)
        diff_r = abs_diff(refined, hires, f"{stem}_circular", stem)
        (dump_dir / f"{stem}_diff_serial.ppm").write_bytes(save_ppm(diff_s.image))
        (dump_dir / f"{stem}_diff_circular.ppm").write_bytes(save_ppm(diff_r.image))
    if trace_dir is not None:
        trace_dir.mkdir(parents=True, exist_ok=True)
        (trace_dir / f"{path.stem}.txt").write_text(format_trace(trace))
    return row, trace


def format_trace(trace) -> str:
    """One line per iteration: index, residual, control, step ratio, psnr."""
    lines = ["iter residual_l2 control_l2 ratio psnr_vs_reference"]
    prev = None
    for i, (r, c) in enumerate(zip(trace.residual_l2, trace.control_l2)):
        ratio = f"{r / prev:.6f}" if prev else "-"
        p = "-"
        if trace.psnr_vs_reference is not None:
            p = _fmt_db(trace.psnr_vs_reference[i])
        lines.append(f"{i + 1} {r:.9g} {c:.9g} {ratio} {p}")
        prev = r
    lines.append(f"final_residual_l2 {trace.final_residual_l2:.9g}")
    return "\n".join(lines) + "\n"


class _ChainFactory:
    """Builds one operator chain per worker thread.

    External backends allow a single in-flight request, so each worker
    owns a dedicated handle; built-in operators are shared freely.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.kind, self.command = cfg.parse_sr()
        self._local = threading.local()
        self._handles = []
        self._lock = threading.Lock()

    def chain(self) -> OperatorChain:
        cached = getattr(self._local, "chain", None)
        if cached is not None:
            return cached
        cfg = self.cfg
        if self.kind == "external":
            handle = BackendHandle(self.command, request_timeout=cfg.request_timeout)
            with self._lock:
                self._handles.append(handle)
            sr = SrOp("external", cfg.scale, backend=handle)
        else:
            sr = SrOp(self.kind, cfg.scale)
        built = OperatorChain(cfg.parse_ds(), cfg.parse_cp(), sr)
        self._local.chain = built
        return built

    def close(self):
        with self._lock:
            handles, self._handles = self._handles, []
        for handle in handles:
            handle.close()


def run_benchmark(cfg: RunConfig) -> Summary:
    """Benchmark every loadable image under cfg.input_dir; write reports."""
    cfg.validate()
    files = discover_inputs(cfg.input_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_dir = out_dir / "images" if cfg.dump_images else None
    trace_dir = out_dir / "traces" if cfg.dump_traces else None

    rows, skipped = [], []
    factory = _ChainFactory(cfg)
    try:
        def task(path):
            return process_image(path, cfg, factory.chain(), dump_dir, trace_dir)

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {pool.submit(task, p): p for p in files}
            try:
                for fut in as_completed(futures):
                    path = futures[fut]
                    try:
                        row, _ = fut.result()
                        rows.append(row)
                    except SkippedImage as exc:
                        skipped.append(str(exc))
                    except BackendError as exc:
                        raise BackendError(f"{path.name}: {exc}") from exc
            except BaseException:
                pool.shutdown(wait=False, cancel_futures=True)
                raise
    finally:
        factory.close()

    if not rows:
        detail = "; ".join(skipped) if skipped else "no .ppm/.pgm files found"
        raise SkippedImage(f"no loadable images in {cfg.input_dir}: {detail}")

    rows.sort(key=lambda r: r.image_id)
    summary = summarize(rows, skipped)
    (out_dir / "results.csv").write_text(
        "\n".join([CSV_HEADER] + [r.csv_line() for r in rows]) + "\n"
    )
    (out_dir / "summary.txt").write_text(summary.text())
    (out_dir / "manifest.txt").write_text(manifest_text(cfg, files))
    return summary


def summarize(rows, skipped) -> Summary:
    mean_psnr, mean_ssim = {}, {}
    for method in ("compressed", "serial", "circular"):
        mean_psnr[method] = float(np.mean([getattr(r, f"psnr_{method}") for r in rows]))
        mean_ssim[method] = float(np.mean([getattr(r, f"ssim_{method}") for r in rows]))
    return Summary(
        rows=rows,
        skipped=skipped,
        mean_psnr=mean_psnr,
        mean_ssim=mean_ssim,
        psnr_increment=_increment(mean_psnr["circular"], mean_psnr["serial"]),
        ssim_increment=mean_ssim["circular"] - mean_ssim["serial"],
    )


def manifest_text(cfg: RunConfig, files) -> str:
    lines = [f"tool loopsr {__version__}"]
    for key, value in cfg.items():
        lines.append(f"{key} {value}")
    for path in files:
        lines.append(f"input {path.name}")
    return "\n".join(lines) + "\n"


def run_single(path, cfg: RunConfig):
    """Full protocol on one image; returns (row, trace, report text)."""
    cfg.validate()
    path = Path(path)
    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    dump_dir = out_dir / "images" if (out_dir and cfg.dump_images) else None
    trace_dir = out_dir / "traces" if out_dir else None
    factory = _ChainFactory(cfg)
    try:
        row, trace = process_image(path, cfg, factory.chain(), dump_dir, trace_dir)
    finally:
        factory.close()
    report = [
        f"image {row.image_id}",
        f"psnr_compressed {_fmt_db(row.psnr_compressed)}",
        f"ssim_compressed {_fmt_score(row.ssim_compressed)}",
        f"psnr_serial {_fmt_db(row.psnr_serial)}",
        f"ssim_serial {_fmt_score(row.ssim_serial)}",
        f"psnr_circular {_fmt_db(row.psnr_circular)}",
        f"ssim_circular {_fmt_score(row.ssim_circular)}",
        f"psnr_increment {_increment(row.psnr_circular, row.psnr_serial):+.2f}",
        f"residual_initial {row.residual_initial:.9g}",
        f"residual_final {row.residual_final:.9g}",
        "",
        format_trace(trace),
    ]
    return row, trace, "\n".join(report)


def protocol_check(command, request_timeout: float = 120.0, log=print) -> bool:
    """Probe a backend command for protocol conformance.

    Checks the handshake, a loopback upscale per advertised scale, the
    server's ERROR path for raw out-of-contract requests, and that the
    connection survives those probes. Returns True when every probe
    passed.
    """
    if isinstance(command, str):
        command = shlex.split(command)
    ok = True

    def probe(name, passed, detail=""):
        nonlocal ok
        ok = ok and passed
        log(f"protocol-check {name}: {'PASS' if passed else 'FAIL'}"
            + (f" ({detail})" if detail else ""))

    try:
        handle = BackendHandle(command, request_timeout=request_timeout)
    except BackendError as exc:
        probe("handshake", False, str(exc))
        return False
    with handle:
        caps = handle.caps
        probe("handshake", True,
              f"scales {list(caps.scales)}, max {caps.max_width}x{caps.max_height}")
        rng = np.random.default_rng(7)
        for scale in caps.scales:
            img = Image(rng.random((3, 6, 5), dtype=np.float32), "rgb")
            try:
                out = handle.super_resolve(img, scale)
                passed = out.shape == (3, 6 * scale, 5 * scale)
                probe(f"upscale_x{scale}", passed, f"got {out.shape}")
            except LoopsrError as exc:
                probe(f"upscale_x{scale}", False, str(exc))
                return False
        bogus = next(s for s in range(1, 256) if s not in caps.scales)
        gray = rng.random((1, 4, 4), dtype=np.float32)
        try:
            handle._send(protocol.MSG_SR_REQUEST,
                         protocol.encode_sr_payload(bogus, 1, 4, 4, gray))
            msg_type, body = handle._recv(request_timeout)
            probe("unsupported_scale_error", msg_type == protocol.MSG_ERROR,
                  body.decode("utf-8", "replace") if msg_type == protocol.MSG_ERROR
                  else f"got type {msg_type}")
            # declared 8x8 but carrying 4x4 samples: must yield ERROR, not death
            lying = protocol._SR_HEAD.pack(caps.scales[0], 1, 8, 8) + gray.tobytes()
            handle._send(protocol.MSG_SR_REQUEST, lying)
            msg_type, body = handle._recv(request_timeout)
            probe("malformed_payload_error", msg_type == protocol.MSG_ERROR,
                  body.decode("utf-8", "replace") if msg_type == protocol.MSG_ERROR
                  else f"got type {msg_type}")
            img = Image(gray, "gray")
            out = handle.super_resolve(img, caps.scales[0])
            probe("survives_probes", out.shape == (1, 4 * caps.scales[0],
                                                   4 * caps.scales[0]))
        except LoopsrError as exc:
            probe("error_path", False, str(exc))
            return False
    return ok


def diff_images(a_path, b_path, out_path, gain: float = 1.0) -> None:
    """Write |a-b| (optionally amplified) plus a sidecar recording the gain."""
    if gain <= 0:
        raise ConfigError(f"gain must be > 0, got {gain}")
    a = load_ppm(Path(a_path).read_bytes())
    b = load_ppm(Path(b_path).read_bytes())
    diff = abs_diff(a, b, str(a_path), str(b_path))
    amplified = diff.image.with_data(
        np.clip(diff.image.data * np.float32(gain), 0.0, 1.0)
    )
    out_path = Path(out_path)
    out_path.write_bytes(save_ppm(amplified))
    sidecar = out_path.with_suffix(out_path.suffix + ".txt")
    sidecar.write_text(f"gain {gain}\na {a_path}\nb {b_path}\n")
