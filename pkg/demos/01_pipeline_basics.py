"""Walk one image through the open-loop pipeline.

A synthetic desk scene is downsampled 4x, put through a lossy DCT
round trip at quality 10, and upscaled back. Each stage is scored
against the original.
"""

import loopsr
from loopsr.corpus import desk_image

hires = loopsr.crop_to_multiple(desk_image(seed=7, width=192, height=192), 4)
print(f"original: {hires.width}x{hires.height} rgb")

chain = loopsr.OperatorChain(
    loopsr.DownsampleOp("bicubic", 4),
    loopsr.CompressOp("dct", quality=10),
    loopsr.SrOp("bicubic", 4),
)

result = loopsr.serial_pipeline(hires, chain)
print(f"lowres:   {result.lowres.width}x{result.lowres.height}")
print(f"restored: {result.restored.width}x{result.restored.height}")

# the compressed observation is upscaled to the reference size for scoring;
# with a plain bicubic upscaler the two rows coincide by construction --
# swap in a neural backend and they separate
compressed_up = loopsr.upsample_for_metric(result.compressed,
                                           hires.width, hires.height)
for name, img in (("compressed", compressed_up), ("restored", result.restored)):
    print(f"{name:>10}: psnr {loopsr.psnr(img, hires):6.2f} dB"
          f"   ssim {loopsr.ssim(img, hires):.4f}")

# difference maps highlight where the reconstruction still deviates
diff = loopsr.abs_diff(result.restored, hires)
print(f"max abs reconstruction error: {float(diff.image.data.max()):.4f}")
