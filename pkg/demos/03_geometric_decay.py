"""The exactly-solvable case: a projection plant decays geometrically.

Nearest-neighbor downsampling followed by nearest-neighbor upscaling is
an idempotent linear map, so the feedback error contracts by exactly
(1 - gain) per iteration. The measured ratios match the closed form to
float precision, which is what the test suite's decay oracle asserts.
"""

import numpy as np

import loopsr

rng = np.random.default_rng(0)
hires = loopsr.Image(rng.random((3, 32, 32), dtype=np.float32), "rgb")

chain = loopsr.OperatorChain(
    loopsr.DownsampleOp("nearest", 4),
    loopsr.CompressOp("identity"),
    loopsr.SrOp("nearest", 4),
)
setpoint = loopsr.serial_pipeline(hires, chain).restored

for gain in (0.1, 0.5, 1.0):
    _, trace = loopsr.refine(
        setpoint, chain,
        loopsr.LoopConfig(gain=gain, iterations=10, init="zero"),
    )
    r = np.array(trace.residual_l2)
    ratios = r[1:] / np.maximum(r[:-1], 1e-300)
    print(f"gain {gain}: predicted ratio {1 - gain:.4f}, "
          f"measured {ratios.min():.6f}..{ratios.max():.6f}")
    if gain == 0.1:
        print(f"  residual after 10 steps: {trace.final_residual_l2 / r[0]:.6f} "
              f"of initial (closed form 0.9^10 = {0.9 ** 10:.6f})")
