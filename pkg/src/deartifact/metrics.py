"""Quality and rate measurement: PSNR, MS-SSIM, bits per pixel.

All metrics run in float64 regardless of input dtype.  MS-SSIM follows the
standard 5-scale construction on BT.601 luma: 11x11 Gaussian window with
sigma 1.5, dyadic downsampling by 2x2 mean pooling, scale weights
(0.0448, 0.2856, 0.3001, 0.2363, 0.1333).  Images too small for five scales
use the largest feasible scale count with the weights renormalized.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import ShapeMismatchError

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
_WINDOW_SIZE = 11
_SIGMA = 1.5
_C1 = (0.01 * 255) ** 2
_C2 = (0.03 * 255) ** 2


@dataclass
class QualityReport:
    psnr_db: float
    ms_ssim: float
    bpp: float


def psnr(a, b):
    """10*log10(255^2 / MSE) over all samples; +inf for identical images."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def bpp(stream_bytes, width, height):
    """Bits per pixel of a stream covering a width x height image."""
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    return 8.0 * stream_bytes / (width * height)


def _luma(img):
    img = img.astype(np.float64)
    if img.ndim == 3:
        if img.shape[0] == 3:
            return 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]
        if img.shape[0] == 1:
            return img[0]
        raise ShapeMismatchError(f"expected 1 or 3 channels, got {img.shape[0]}")
    return img


def _gaussian_window():
    half = (_WINDOW_SIZE - 1) / 2
    coords = np.arange(_WINDOW_SIZE) - half
    g = np.exp(-(coords ** 2) / (2 * _SIGMA ** 2))
    win = np.outer(g, g)
    return win / win.sum()


_WIN = _gaussian_window()


def _ssim_maps(x, y):
    """Per-pixel luminance and contrast-structure terms (valid region only)."""
    mu_x = convolve2d(x, _WIN, mode="valid")
    mu_y = convolve2d(y, _WIN, mode="valid")
    sxx = convolve2d(x * x, _WIN, mode="valid") - mu_x * mu_x
    syy = convolve2d(y * y, _WIN, mode="valid") - mu_y * mu_y
    sxy = convolve2d(x * y, _WIN, mode="valid") - mu_x * mu_y
    lum = (2 * mu_x * mu_y + _C1) / (mu_x ** 2 + mu_y ** 2 + _C1)
    cs = (2 * sxy + _C2) / (sxx + syy + _C2)
    return lum, cs


def _downsample(x):
    h, w = x.shape
    x = x[: h - h % 2, : w - w % 2]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def feasible_scales(height, width, max_scales=5):
    """Largest scale count whose coarsest image still fits the 11x11 window."""
    scales = 0
    size = min(height, width)
    while scales < max_scales and size >= _WINDOW_SIZE:
        scales += 1
        size //= 2
    return scales


def ms_ssim(a, b, scales=None):
    """Multi-scale SSIM on luma; result in [0, 1] for natural-range images."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    x, y = _luma(a), _luma(b)
    if scales is None:
        scales = feasible_scales(*x.shape)
    if scales < 1:
        raise ValueError(f"image {x.shape} too small for even one 11x11 scale")
    if min(x.shape) // (2 ** (scales - 1)) < _WINDOW_SIZE:
        raise ValueError(f"image {x.shape} too small for {scales} scales")
    weights = np.asarray(MS_SSIM_WEIGHTS[:scales], np.float64)
    weights = weights / weights.sum()
    terms = []
    for level in range(scales):
        lum, cs = _ssim_maps(x, y)
        if level == scales - 1:
            terms.append(float(np.mean(lum * cs)))
        else:
            terms.append(float(np.mean(cs)))
            x, y = _downsample(x), _downsample(y)
    terms = np.maximum(terms, 0.0)
    return float(np.prod(terms ** weights))


def corpus_report(pairs, stream_sizes):
    """Per-image reports plus the aggregate.

    `pairs` is a list of (original, decoded) image pairs, `stream_sizes` the
    matching container byte counts.  Aggregate PSNR and MS-SSIM are per-image
    means; aggregate bpp is total bits over total pixels.
    """
    if not pairs:
        raise ValueError("empty corpus")
    if len(pairs) != len(stream_sizes):
        raise ShapeMismatchError(
            f"{len(pairs)} image pairs but {len(stream_sizes)} streams"
        )
    per_image = []
    total_bits = 0
    total_pixels = 0
    for (orig, dec), size in zip(pairs, stream_sizes):
        _, h, w = orig.shape
        per_image.append(QualityReport(psnr(orig, dec), ms_ssim(orig, dec), bpp(size, w, h)))
        total_bits += 8 * size
        total_pixels += h * w
    aggregate = QualityReport(
        psnr_db=float(np.mean([r.psnr_db for r in per_image])),
        ms_ssim=float(np.mean([r.ms_ssim for r in per_image])),
        bpp=total_bits / total_pixels,
    )
    return per_image, aggregate
