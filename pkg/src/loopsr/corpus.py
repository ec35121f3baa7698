"""Deterministic synthetic desk scenes for benchmarks and tests.

Each scene is composed from smooth gradients, soft-edged rectangles and
disks, and thin strokes, with a faint seeded texture on top. The content
is deliberately photograph-like (mostly smooth, some sharp structure) so
that lossy compression behaves the way it does on natural images.
"""

from __future__ import annotations

import numpy as np

from .image import RGB, Image


def _smoothstep(d: np.ndarray, softness: float) -> np.ndarray:
    """0 outside, 1 inside, smooth ramp of the given width across d=0."""
    t = np.clip(0.5 - d / softness, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _rect_mask(xx, yy, x0, y0, x1, y1, soft):
    dx = np.maximum(x0 - xx, xx - x1)
    dy = np.maximum(y0 - yy, yy - y1)
    return _smoothstep(np.maximum(dx, dy), soft)


def _disk_mask(xx, yy, cx, cy, r, soft):
    d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2) - r
    return _smoothstep(d, soft)


def desk_image(seed: int, width: int = 192, height: int = 192) -> Image:
    """One synthetic desk scene; identical bytes for identical arguments."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(height, dtype=np.float64),
                         np.arange(width, dtype=np.float64), indexing="ij")
    u, v = xx / width, yy / height

    # tabletop: smooth diagonal gradient in a warm base color
    base = np.array([0.45, 0.38, 0.30]) + rng.uniform(-0.08, 0.08, 3)
    tilt = 0.18 * (u * rng.uniform(0.5, 1.0) + v * rng.uniform(0.3, 0.9))
    img = base[:, None, None] + tilt[None] * rng.uniform(0.6, 1.0, 3)[:, None, None]

    soft = 1.5
    # sheets of paper: bright rectangles with a shadow edge
    for _ in range(rng.integers(2, 4)):
        x0, y0 = rng.uniform(0.05, 0.5, 2) * (width, height)
        w, h = rng.uniform(0.25, 0.45, 2) * (width, height)
        mask = _rect_mask(xx, yy, x0, y0, x0 + w, y0 + h, soft)
        shadow = _rect_mask(xx, yy, x0 + 3, y0 + 3, x0 + w + 3, y0 + h + 3, 4.0)
        tone = rng.uniform(0.82, 0.95)
        img = img * (1 - 0.25 * shadow * (1 - mask))
        for c in range(3):
            img[c] = img[c] * (1 - mask) + mask * tone
        # text-like line strokes on the sheet
        n_lines = int(h // 9)
        for k in range(max(2, n_lines)):
            ly = y0 + 6 + 9 * k
            if ly > y0 + h - 5:
                break
            lx1 = x0 + 5 + rng.uniform(0, 0.2) * w
            lx2 = x0 + w - 5 - rng.uniform(0, 0.35) * w
            line = _rect_mask(xx, yy, lx1, ly, lx2, ly + 1.4, 0.9)
            ink = rng.uniform(0.15, 0.35)
            for c in range(3):
                img[c] = img[c] * (1 - line) + line * ink
    # mug: dark disk with a lighter rim
    cx, cy = rng.uniform(0.55, 0.85) * width, rng.uniform(0.15, 0.5) * height
    r = rng.uniform(0.08, 0.13) * min(width, height)
    outer = _disk_mask(xx, yy, cx, cy, r, soft)
    inner = _disk_mask(xx, yy, cx, cy, 0.75 * r, soft)
    mug = rng.uniform(0.2, 0.8, 3)
    for c in range(3):
        img[c] = img[c] * (1 - outer) + outer * mug[c]
        img[c] = img[c] * (1 - inner) + inner * (mug[c] * 0.45)
    # pen: thin elongated rectangle
    px, py = rng.uniform(0.1, 0.6) * width, rng.uniform(0.65, 0.85) * height
    pen = _rect_mask(xx, yy, px, py, px + 0.35 * width, py + 2.5, 1.0)
    pen_color = rng.uniform(0.05, 0.5, 3)
    for c in range(3):
        img[c] = img[c] * (1 - pen) + pen * pen_color[c]

    # paper grain, then a gentle vignette
    img += rng.normal(0.0, 0.008, img.shape)
    fall = 1.0 - 0.12 * ((u - 0.5) ** 2 + (v - 0.5) ** 2)
    img *= fall[None]
    return Image(np.clip(img, 0.0, 1.0).astype(np.float32), RGB)


def desk_corpus(count: int = 6, base_seed: int = 100) -> list:
    """Named scenes at varied desk-scale sizes: [(name, Image), ...]."""
    sizes = [(192, 192), (160, 128), (256, 192), (128, 128), (224, 160), (192, 256)]
    out = []
    for i in range(count):
        w, h = sizes[i % len(sizes)]
        out.append((f"desk_{i:02d}", desk_image(base_seed + i, w, h)))
    return out


def gray_corpus(count: int = 6, base_seed: int = 300) -> list:
    """Grayscale variants (luma of the same kind of scenes)."""
    from .image import gray_from

    return [(f"gray_{i:02d}", gray_from(desk_image(base_seed + i)))
            for i in range(count)]


def write_corpus(directory, count: int = 6, base_seed: int = 100) -> list:
    """Render the corpus into a directory as PPM files; returns the paths."""
    import pathlib

    from .image import save_ppm

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, img in desk_corpus(count, base_seed):
        path = directory / f"{name}.ppm"
        path.write_bytes(save_ppm(img))
        paths.append(path)
    return paths
