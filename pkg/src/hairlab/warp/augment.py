"""Deterministic geometric augmentation applied jointly to a hair image and
its mask: flip, rotation, scaling, and a sinusoidal positional distortion,
sampled once through a single bilinear grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..imaging.types import Image, Mask


@dataclass(frozen=True)
class AugmentationSpec:
    """rotation is the half-range in degrees (drawn per seed); scale is a
    (lo, hi) factor range; trig amplitude is the per-seed draw ceiling in
    pixels (so the identity transform stays inside the family) with
    frequency in cycles per image."""

    flip: bool = False
    rotation: float = 0.0
    trig_amplitude: float = 0.0
    trig_frequency: float = 1.0
    scale: tuple[float, float] = (1.0, 1.0)
    seed: int = 0
    orientation: int = 1

    def __post_init__(self) -> None:
        if self.rotation < 0:
            raise ValueError("rotation half-range must be >= 0")
        lo, hi = self.scale
        if lo <= 0 or hi <= 0 or lo > hi:
            raise ValueError("scale factors must be positive with lo <= hi")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    def draw(self) -> tuple[float, float, float]:
        """(angle_deg, scale, trig_amplitude_px) for this spec's seed."""
        rng = np.random.default_rng(self.seed)
        angle = self.orientation * float(rng.uniform(-self.rotation, self.rotation))
        lo, hi = self.scale
        scale = float(rng.uniform(lo, hi))
        amp = math.copysign(
            float(rng.uniform(0.0, abs(self.trig_amplitude))), self.trig_amplitude
        )
        return angle, scale, amp

    def mirrored(self) -> "AugmentationSpec":
        """Spec whose transform is the horizontal-mirror conjugate: rotation
        and distortion amplitude change sign, flip and scale are symmetric."""
        return replace(
            self,
            orientation=-self.orientation,
            trig_amplitude=-self.trig_amplitude,
        )

    def is_identity(self) -> bool:
        angle, scale, amp = self.draw()
        return not self.flip and angle == 0.0 and amp == 0.0 and scale == 1.0


def _bilinear(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) at float coords; outside reads as zero."""
    h, w = data.shape[:2]
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]

    def tap(yi, xi):
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        yc = np.clip(yi, 0, h - 1)
        xc = np.clip(xi, 0, w - 1)
        return data[yc, xc] * inside[..., None]

    top = tap(y0, x0) * (1 - fx) + tap(y0, x0 + 1) * fx
    bot = tap(y0 + 1, x0) * (1 - fx) + tap(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def _read_coords(
    spec: AugmentationSpec, h: int, w: int, angle_deg: float, scale: float, amp: float
) -> tuple[np.ndarray, np.ndarray]:
    """Source coordinates for each output pixel, center-relative ops."""
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    u = xx - cx
    v = yy - cy
    # Sinusoidal distortion: x offset driven by y and vice versa.
    a = amp
    f = spec.trig_frequency
    ut = u + a * np.sin(2.0 * math.pi * f * v / h)
    vt = v + a * np.sin(2.0 * math.pi * f * u / w)
    us = ut / scale
    vs = vt / scale
    th = math.radians(angle_deg)
    c, s = math.cos(th), math.sin(th)
    ur = c * us + s * vs
    vr = -s * us + c * vs
    if spec.flip:
        ur = -ur
    return ur + cx, vr + cy


def augment_hair(
    hair_img: Image, hair_mask: Mask, spec: AugmentationSpec
) -> tuple[Image, Mask]:
    """Identical transform on image and mask; identity specs return the
    inputs untouched so no interpolation loss sneaks in."""
    if hair_img.height != hair_mask.data.shape[0] or hair_img.width != hair_mask.data.shape[1]:
        raise ValueError("image and mask dims differ")
    if spec.is_identity():
        return hair_img, hair_mask
    angle, scale, amp = spec.draw()
    xs, ys = _read_coords(spec, hair_img.height, hair_img.width, angle, scale, amp)
    img_out = _bilinear(hair_img.data.astype(np.float64), xs, ys)
    mask_out = _bilinear(
        hair_mask.data.astype(np.float64)[:, :, None], xs, ys
    )[:, :, 0]
    return (
        Image(np.clip(img_out, 0.0, 1.0).astype(np.float32)),
        Mask((mask_out >= 0.5).astype(np.uint8)),
    )
