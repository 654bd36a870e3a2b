import numpy as np
import pytest


def textured_image(seed, size=64):
    """Synthetic textured RGB image: gratings plus rectangles, 8-bit values."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.zeros((3, size, size))
    for c in range(3):
        plane = np.full((size, size), rng.uniform(60, 200))
        for _ in range(4):
            fy, fx = rng.uniform(0.02, 0.45, 2)
            amp = rng.uniform(10, 45)
            plane += amp * np.sin(2 * np.pi * (fy * yy + fx * xx) + rng.uniform(0, 2 * np.pi))
        for _ in range(3):
            top, left = rng.integers(0, size, 2)
            h, w = rng.integers(4, size // 2, 2)
            plane[top:top + h, left:left + w] += rng.uniform(-50, 50)
        img[c] = plane
    return np.floor(np.clip(img, 0, 255)).astype(np.float32)


def random_image(seed, channels=3, height=16, width=16, scale=255.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, scale, (channels, height, width)).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
