"""Stroke-map intake: RGBA rasters painted by a user become binary-alpha
color carriers aligned with the source image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging.resample import resize_image
from ..imaging.types import Image, Mask

# Painted pixels keep at least this intensity so pure-black strokes stay
# distinguishable from unpainted (all-zero) pixels downstream.
MIN_PAINT_VALUE = 1.0 / 255.0


@dataclass(frozen=True)
class StrokeMap:
    """Image-aligned RGBA float raster with binary alpha."""

    rgba: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.rgba, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValueError("stroke map must be (H, W, 4)")
        alpha = arr[:, :, 3]
        if not np.all((alpha == 0.0) | (alpha == 1.0)):
            raise ValueError("alpha must be binary after intake")
        if arr[:, :, :3].min() < 0.0 or arr[:, :, :3].max() > 1.0:
            raise ValueError("RGB values must lie in [0,1]")
        object.__setattr__(self, "rgba", arr)

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def width(self) -> int:
        return self.rgba.shape[1]

    def painted_mask(self) -> Mask:
        return Mask(self.rgba[:, :, 3].astype(np.uint8))

    def color_image(self) -> Image:
        """RGB with unpainted pixels zeroed."""
        alpha = self.rgba[:, :, 3:4]
        return Image((self.rgba[:, :, :3] * alpha).astype(np.float32))


def intake_stroke_map(
    raw: np.ndarray,
    source_hw: tuple[int, int],
    allow_resize: bool = True,
) -> StrokeMap:
    """Threshold alpha at 0.5, clamp RGB, and lift painted near-black pixels
    to the minimum paint value. Resizes to the source dims when permitted."""
    arr = np.asarray(raw, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 4:
        raise ValueError("raw stroke raster must be (H, W, 4)")
    h, w = source_hw
    if arr.shape[:2] != (h, w):
        if not allow_resize:
            raise ValueError(
                f"stroke raster {arr.shape[:2]} does not match source {(h, w)}"
            )
        rgb = resize_image(Image(np.clip(arr[:, :, :3], 0.0, 1.0)), h, w).data
        alpha_img = Image(np.clip(arr[:, :, 3:4], 0.0, 1.0))
        alpha = resize_image(alpha_img, h, w).data[:, :, 0]
        arr = np.concatenate([rgb, alpha[:, :, None]], axis=2)
    alpha = (arr[:, :, 3] >= 0.5).astype(np.float32)
    rgb = np.clip(arr[:, :, :3], 0.0, 1.0)
    painted_dark = (alpha == 1.0) & (rgb.max(axis=2) < MIN_PAINT_VALUE)
    rgb[painted_dark] = MIN_PAINT_VALUE
    return StrokeMap(np.concatenate([rgb, alpha[:, :, None]], axis=2).astype(np.float32))
