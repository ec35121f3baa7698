"""Delegate the upscaler to a child process over the wire protocol.

Needs the reference backend package (see backend/ in this repository):

    pip install -e backend/ --no-build-isolation

The same refinement loop then runs with the upscale unit living in
another process -- the slot where a neural model would plug in.
"""

import importlib.util
import sys

import numpy as np

import loopsr
from loopsr.corpus import desk_image

if importlib.util.find_spec("srbackend") is None:
    sys.exit("reference backend not installed; run: pip install -e backend/")

command = [sys.executable, "-m", "srbackend", "--mode", "bicubic"]

with loopsr.BackendHandle(command) as handle:
    print(f"backend caps: scales {list(handle.caps.scales)}, "
          f"max {handle.caps.max_width}x{handle.caps.max_height}")

    hires = loopsr.crop_to_multiple(desk_image(seed=5, width=160, height=160), 4)
    chain = loopsr.OperatorChain(
        loopsr.DownsampleOp("bicubic", 4),
        loopsr.CompressOp("dct", quality=40),
        loopsr.SrOp("external", 4, backend=handle),
    )
    serial = loopsr.serial_pipeline(hires, chain)
    refined, trace = loopsr.refine(serial.restored, chain,
                                   loopsr.LoopConfig(gain=0.1, iterations=10))

    local = loopsr.super_resolve(serial.compressed, loopsr.SrOp("bicubic", 4))
    gap = float(np.abs(local.data - serial.restored.data).max())
    print(f"external vs in-process bicubic, max abs gap: {gap:.2e}")
    print(f"after refinement: psnr {loopsr.psnr(refined, hires):.2f} dB "
          f"({loopsr.psnr(refined, hires) - loopsr.psnr(serial.restored, hires):+.2f} "
          f"over open loop)")
