"""Mask and image resampling."""

from __future__ import annotations

import numpy as np

from .types import Image, Mask


def _overlap_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) matrix of exact interval-overlap fractions.

    Row i holds the fraction of destination cell i covered by each source
    pixel; rows sum to 1. Exact for divisible and fractional ratios alike.
    """
    if dst <= 0:
        raise ValueError("target dims must be positive")
    scale = src / dst
    w = np.zeros((dst, src), dtype=np.float64)
    for i in range(dst):
        lo = i * scale
        hi = (i + 1) * scale
        y0 = int(np.floor(lo))
        y1 = int(np.ceil(hi))
        for y in range(y0, min(y1, src)):
            w[i, y] = min(hi, y + 1) - max(lo, y)
    return w / scale


def downsample_mask(mask: Mask, target_h: int, target_w: int, threshold: float = 0.5) -> Mask:
    """Area-average the mask to target dims, then binarize: coverage >= threshold -> 1."""
    if target_h <= 0 or target_w <= 0:
        raise ValueError("target dims must be positive")
    if target_h > mask.height or target_w > mask.width:
        raise ValueError("target dims must not exceed source dims")
    if (target_h, target_w) == (mask.height, mask.width):
        return Mask(mask.data.copy())
    wr = _overlap_weights(mask.height, target_h)
    wc = _overlap_weights(mask.width, target_w)
    coverage = wr @ mask.data.astype(np.float64) @ wc.T
    return Mask((coverage >= threshold - 1e-12).astype(np.uint8))


def mask_coverage(mask: Mask, target_h: int, target_w: int) -> np.ndarray:
    """Fractional per-cell coverage used by downsample_mask, before thresholding."""
    wr = _overlap_weights(mask.height, target_h)
    wc = _overlap_weights(mask.width, target_w)
    return wr @ mask.data.astype(np.float64) @ wc.T


def resize_image(img: Image, target_h: int, target_w: int) -> Image:
    """Bilinear resize with pixel-center alignment."""
    if (target_h, target_w) == (img.height, img.width):
        return img
    data = img.data.astype(np.float64)
    ys = (np.arange(target_h) + 0.5) * img.height / target_h - 0.5
    xs = (np.arange(target_w) + 0.5) * img.width / target_w - 0.5
    ys = np.clip(ys, 0, img.height - 1)
    xs = np.clip(xs, 0, img.width - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, img.height - 1)
    x1 = np.minimum(x0 + 1, img.width - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    out = (
        data[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + data[np.ix_(y0, x1)] * (1 - fy) * fx
        + data[np.ix_(y1, x0)] * fy * (1 - fx)
        + data[np.ix_(y1, x1)] * fy * fx
    )
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))


def resize_mask(mask: Mask, target_h: int, target_w: int) -> Mask:
    """Nearest-neighbor resize for binary masks (up or down)."""
    if (target_h, target_w) == (mask.height, mask.width):
        return Mask(mask.data.copy())
    ys = np.minimum(((np.arange(target_h) + 0.5) * mask.height / target_h).astype(int), mask.height - 1)
    xs = np.minimum(((np.arange(target_w) + 0.5) * mask.width / target_w).astype(int), mask.width - 1)
    return Mask(mask.data[np.ix_(ys, xs)])
