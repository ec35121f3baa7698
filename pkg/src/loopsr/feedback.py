"""Open-loop restoration pipeline and the closed-loop refinement iteration.

The serial pipeline produces an initial reconstruction from a ground-truth
image by degrading and restoring it. The refinement loop then treats that
initial reconstruction as a set-point: it repeatedly re-degrades the
current estimate, measures the error against the set-point, and feeds a
scaled copy of the error back into the estimate. At steady state the
re-degraded estimate reproduces the set-point exactly.

The estimate is iterated unclamped by default so that linear operator
chains stay linear (making the geometric-decay analysis exact); the
returned image is clamped to [0, 1] once at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ops
from .errors import ConfigError, ContractViolation, DivergenceError, LoopIterationError, LoopsrError
from .image import Image
from .metrics import psnr
from .ops import OperatorChain

INIT_MODES = ("serial", "zero", "random")


@dataclass(frozen=True)
class LoopConfig:
    """Knobs of the refinement iteration.

    gain is the per-iteration feedback constant in (0, 1]; iterations the
    fixed step budget. init selects the starting estimate: the set-point
    itself ("serial"), all zeros ("zero"), or seeded uniform noise
    ("random"). early_stop_tol, when set, ends the loop once the residual
    L2 norm falls to or below it.
    """

    gain: float = 0.1
    iterations: int = 10
    init: str = "serial"
    seed: int = 0
    clamp_each_iter: bool = False
    early_stop_tol: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.gain <= 1.0:
            raise ConfigError(f"gain must be in (0, 1], got {self.gain}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.early_stop_tol is not None and self.early_stop_tol < 0:
            raise ConfigError(f"early_stop_tol must be >= 0, got {self.early_stop_tol}")


@dataclass
class LoopTrace:
    """Per-iteration diagnostics of one refinement run.

    residual_l2[n] is the L2 norm of the error measured at the start of
    iteration n+1 (before that iteration's update); control_l2 the norm of
    the correction actually applied. final_residual_l2 is measured once
    more after the last update, on the unclamped final estimate, so
    final_residual_l2 / residual_l2[0] is the whole-loop contraction.
    """

    residual_l2: list = field(default_factory=list)
    control_l2: list = field(default_factory=list)
    psnr_vs_reference: Optional[list] = None
    iterations_run: int = 0
    final_residual_l2: float = 0.0


@dataclass(frozen=True)
class SerialResult:
    """The three intermediate products of the open-loop pipeline."""

    lowres: Image       # after downsampling
    compressed: Image   # after the lossy round trip
    restored: Image     # after upscaling; the loop's set-point


def serial_pipeline(hires: Image, chain: OperatorChain) -> SerialResult:
    """Degrade and restore a ground-truth image through the full chain."""
    lowres = ops.downsample(hires, chain.ds)
    compressed = ops.compress_roundtrip(lowres, chain.cp)
    restored = ops.super_resolve(compressed, chain.sr)
    return SerialResult(lowres, compressed, restored)


def residual(setpoint: Image, estimate: Image, chain: OperatorChain) -> Image:
    """Error image: setpoint minus the re-degraded estimate (unclamped)."""
    if setpoint.shape != estimate.shape:
        raise ContractViolation(
            f"setpoint {setpoint.shape} and estimate {estimate.shape} differ"
        )
    return setpoint.with_data(setpoint.data - ops.apply_chain(estimate, chain).data)


def _l2(arr: np.ndarray) -> float:
    return float(np.linalg.norm(arr.astype(np.float64).ravel()))


def _initial_estimate(setpoint: Image, cfg: LoopConfig) -> Image:
    if cfg.init == "serial":
        return setpoint
    if cfg.init == "zero":
        return setpoint.with_data(np.zeros_like(setpoint.data))
    rng = np.random.default_rng(cfg.seed)
    noise = rng.random(setpoint.shape, dtype=np.float32)
    return setpoint.with_data(noise)


def refine(setpoint: Image, chain: OperatorChain, cfg: LoopConfig,
           reference: Optional[Image] = None) -> tuple[Image, LoopTrace]:
    """Run the closed-loop refinement against a frozen set-point.

    Returns the final estimate (clamped to [0, 1] once, regardless of the
    per-iteration clamp policy) and the iteration trace. When a reference
    image is supplied its PSNR against the estimate is recorded after
    every update. Raises DivergenceError if the residual norm grows past
    ten times its initial value.
    """
    if setpoint.width % chain.factor or setpoint.height % chain.factor:
        raise ContractViolation(
            f"set-point {setpoint.width}x{setpoint.height} not divisible "
            f"by chain factor {chain.factor}"
        )
    estimate = _initial_estimate(setpoint, cfg)
    trace = LoopTrace(psnr_vs_reference=[] if reference is not None else None)
    gain = np.float32(cfg.gain)

    for n in range(1, cfg.iterations + 1):
        try:
            err = residual(setpoint, estimate, chain)
        except LoopsrError as exc:
            raise LoopIterationError(n, exc) from exc
        rnorm = _l2(err.data)
        trace.residual_l2.append(rnorm)
        trace.control_l2.append(cfg.gain * rnorm)
        if trace.residual_l2[0] > 0 and rnorm > 10.0 * trace.residual_l2[0]:
            raise DivergenceError(cfg.gain, n, trace.residual_l2[0], rnorm)
        updated = estimate.data + gain * err.data
        if cfg.clamp_each_iter:
            updated = np.clip(updated, 0.0, 1.0)
        estimate = estimate.with_data(updated)
        if reference is not None:
            trace.psnr_vs_reference.append(psnr(estimate, reference))
        trace.iterations_run = n
        if cfg.early_stop_tol is not None and rnorm <= cfg.early_stop_tol:
            break

    try:
        trace.final_residual_l2 = _l2(residual(setpoint, estimate, chain).data)
    except LoopsrError as exc:
        raise LoopIterationError(trace.iterations_run, exc) from exc
    final = estimate.with_data(np.clip(estimate.data, 0.0, 1.0))
    return final, trace


def reconstruct(observation: Image, chain: OperatorChain, cfg: LoopConfig,
                reference: Optional[Image] = None) -> tuple[Image, LoopTrace]:
    """Entry point when only the degraded low-res observation exists.

    Upscales the observation to form the set-point, then refines.
    """
    setpoint = ops.super_resolve(observation, chain.sr)
    return refine(setpoint, chain, cfg, reference=reference)
