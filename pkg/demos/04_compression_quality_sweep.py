"""How lossy is the DCT round trip, and when does feedback help?

Sweeps the compression quality. At very low quality the quantizer's
dead zones are so wide that the serial reconstruction is already a fixed
point of the loop (the residual starts at zero); in the mid quality
range the loop does real work. The sweep prints both the round-trip
error and the refinement gain at each quality.
"""

import numpy as np

import loopsr
from loopsr.corpus import desk_image

hires = loopsr.crop_to_multiple(desk_image(seed=11, width=192, height=192), 4)

print("quality  rmse      r0        refine_gain_db")
for quality in (10, 20, 30, 40, 50, 70, 90):
    out = loopsr.compress_roundtrip(hires, loopsr.CompressOp("dct", quality=quality))
    rmse = float(np.sqrt(np.mean((out.data - hires.data) ** 2)))

    chain = loopsr.OperatorChain(
        loopsr.DownsampleOp("bicubic", 4),
        loopsr.CompressOp("dct", quality=quality),
        loopsr.SrOp("bicubic", 4),
    )
    serial = loopsr.serial_pipeline(hires, chain)
    refined, trace = loopsr.refine(serial.restored, chain,
                                   loopsr.LoopConfig(gain=0.1, iterations=10))
    gain_db = loopsr.psnr(refined, hires) - loopsr.psnr(serial.restored, hires)
    r0 = trace.residual_l2[0]
    print(f"{quality:>7}  {rmse:.5f}  {r0:8.4f}  {gain_db:+13.3f}")
