import numpy as np
import pytest

from loopsr.image import GRAY, RGB, Image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, width=16, height=16, channels=3):
    data = rng.random((channels, height, width), dtype=np.float32)
    return Image(data, RGB if channels == 3 else GRAY)


def grid_image(rng, width=8, height=8, channels=1):
    """Random image whose samples sit exactly on the 8-bit grid."""
    u8 = rng.integers(0, 256, (channels, height, width), dtype=np.uint8)
    data = u8.astype(np.float32) / np.float32(255.0)
    return Image(data, RGB if channels == 3 else GRAY)
