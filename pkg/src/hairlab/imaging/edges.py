"""Canny edge extraction used for the hairstyle control signal."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .filters import gaussian_blur
from .types import Image, Mask

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def canny_edges(img: Image, low_thresh: float = 0.1, high_thresh: float = 0.3) -> Mask:
    """Gaussian smooth -> Sobel -> non-maximum suppression -> hysteresis.

    Thresholds are fractions of the image's maximum gradient magnitude, so
    the result is invariant to global intensity offsets.
    """
    if not (0.0 <= low_thresh < high_thresh <= 1.0):
        raise ValueError("need 0 <= low_thresh < high_thresh <= 1")

    gray = gaussian_blur(Image(img.gray()[:, :, None]), sigma=1.0).data[:, :, 0].astype(np.float64)
    gx = ndimage.correlate(gray, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(gray, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0.0:
        return Mask.zeros(img.height, img.width)

    # Quantize gradient direction into 4 bins and keep local maxima along it.
    ang = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    h, w = mag.shape
    padded = np.pad(mag, 1, mode="constant")

    def shifted(dy, dx):
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    bins = [
        ((ang < 22.5) | (ang >= 157.5), (0, 1), (0, -1)),     # horizontal gradient
        ((ang >= 22.5) & (ang < 67.5), (1, 1), (-1, -1)),     # diagonal /
        ((ang >= 67.5) & (ang < 112.5), (1, 0), (-1, 0)),     # vertical gradient
        ((ang >= 112.5) & (ang < 157.5), (1, -1), (-1, 1)),   # diagonal \
    ]
    nms = np.zeros_like(mag)
    for sel, (d1y, d1x), (d2y, d2x) in bins:
        keep = sel & (mag >= shifted(d1y, d1x)) & (mag >= shifted(d2y, d2x))
        nms[keep] = mag[keep]

    strong = nms >= high_thresh * peak
    weak = nms >= low_thresh * peak
    # Hysteresis: keep weak pixels 8-connected to a strong pixel.
    structure = np.ones((3, 3), dtype=bool)
    labels, n = ndimage.label(weak, structure=structure)
    if n == 0:
        return Mask.zeros(h, w)
    strong_labels = np.unique(labels[strong])
    strong_labels = strong_labels[strong_labels != 0]
    out = np.isin(labels, strong_labels)
    return Mask(out.astype(np.uint8))
