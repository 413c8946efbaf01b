"""Classical smoothing filters."""

from __future__ import annotations

import numpy as np

from .types import BilateralParams, Image


def _spatial_kernel(radius: int, sigma: float) -> np.ndarray:
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    return np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))


def gaussian_blur(img: Image, sigma: float, radius: int | None = None) -> Image:
    """Plain Gaussian blur with a truncated window and edge renormalization."""
    if radius is None:
        radius = int(np.ceil(2.0 * sigma))
    kern = _spatial_kernel(radius, sigma)
    data = img.data.astype(np.float64)
    h, w, c = data.shape
    acc = np.zeros_like(data)
    norm = np.zeros((h, w), dtype=np.float64)
    for dy in range(-radius, radius + 1):
        y0, y1 = max(0, -dy), min(h, h - dy)
        sy0, sy1 = max(0, dy), min(h, h + dy)
        for dx in range(-radius, radius + 1):
            x0, x1 = max(0, -dx), min(w, w - dx)
            sx0, sx1 = max(0, dx), min(w, w + dx)
            wgt = kern[dy + radius, dx + radius]
            acc[y0:y1, x0:x1] += wgt * data[sy0:sy1, sx0:sx1]
            norm[y0:y1, x0:x1] += wgt
    out = acc / norm[:, :, None]
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))


def bilateral_filter(img: Image, params: BilateralParams) -> Image:
    """Edge-preserving smoothing: spatial Gaussian x range Gaussian weights.

    The range term is measured per channel on the input image, so each
    channel is filtered independently; output is the normalized weighted
    mean over the (2*radius+1)^2 window.
    """
    r = params.radius
    kern = _spatial_kernel(r, params.spatial_sigma)
    inv_2rs2 = 1.0 / (2.0 * params.range_sigma * params.range_sigma)

    data = img.data.astype(np.float64)
    h, w, c = data.shape
    acc = np.zeros_like(data)
    norm = np.zeros_like(data)
    for dy in range(-r, r + 1):
        y0, y1 = max(0, -dy), min(h, h - dy)
        sy0, sy1 = max(0, dy), min(h, h + dy)
        for dx in range(-r, r + 1):
            x0, x1 = max(0, -dx), min(w, w - dx)
            sx0, sx1 = max(0, dx), min(w, w + dx)
            shifted = data[sy0:sy1, sx0:sx1]
            center = data[y0:y1, x0:x1]
            diff = shifted - center
            wgt = kern[dy + r, dx + r] * np.exp(-(diff * diff) * inv_2rs2)
            acc[y0:y1, x0:x1] += wgt * shifted
            norm[y0:y1, x0:x1] += wgt
    out = acc / norm
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))
