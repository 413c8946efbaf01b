"""HSV conversions and hue statistics on float arrays."""

from __future__ import annotations

import numpy as np


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB->HSV. rgb is (..., 3) in [0,1]; hue returned in [0, 1)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.maximum(maxc, 1e-20), 0.0)

    dz = np.maximum(delta, 1e-20)
    rc = (maxc - r) / dz
    gc = (maxc - g) / dz
    bc = (maxc - b) / dz
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = (h / 6.0) % 1.0
    h = np.where(delta == 0, 0.0, h)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV->RGB. hsv is (..., 3), hue in [0, 1)."""
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(i, choices_r)
    g = np.choose(i, choices_g)
    b = np.choose(i, choices_b)
    return np.stack([r, g, b], axis=-1)


def mean_hue_deg(rgb_pixels: np.ndarray) -> float:
    """Circular mean hue in degrees of an (N, 3) pixel array."""
    pix = np.asarray(rgb_pixels, dtype=np.float64).reshape(-1, 3)
    if pix.shape[0] == 0:
        raise ValueError("no pixels to measure")
    h = rgb_to_hsv(pix)[:, 0] * 2.0 * np.pi
    c = np.cos(h).mean()
    s = np.sin(h).mean()
    ang = np.degrees(np.arctan2(s, c)) % 360.0
    return float(ang)


def hue_distance_deg(a: float, b: float) -> float:
    """Shortest angular distance between two hues, in degrees."""
    d = abs((a - b) % 360.0)
    return min(d, 360.0 - d)
