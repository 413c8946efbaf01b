"""Pixel-space data carriers shared by every stage of the pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from ..maskops import SegMap, KeypointSet
    from .avatar import AvatarParams


@dataclass(frozen=True)
class Image:
    """Float image, values in [0, 1], shape (H, W, C) with C in {1, 3}."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ValueError(f"image must be (H, W, 1|3), got {d.shape}")
        if d.shape[0] < 8 or d.shape[1] < 8:
            raise ValueError(f"image dims must be >= 8, got {d.shape[:2]}")
        if not np.isfinite(d).all():
            raise ValueError("image contains non-finite values")
        if d.min() < -1e-6 or d.max() > 1 + 1e-6:
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", np.clip(d, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def gray(self) -> np.ndarray:
        """Luma plane (H, W); plain channel mean for 3-channel images."""
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data.mean(axis=2)

    def to_rgb(self) -> "Image":
        if self.channels == 3:
            return self
        return Image(np.repeat(self.data, 3, axis=2))

    @staticmethod
    def zeros(height: int, width: int, channels: int = 3) -> "Image":
        return Image(np.zeros((height, width, channels), dtype=np.float32))

    @staticmethod
    def full(height: int, width: int, value: float, channels: int = 3) -> "Image":
        return Image(np.full((height, width, channels), value, dtype=np.float32))


@dataclass(frozen=True)
class Mask:
    """Binary per-pixel mask, shape (H, W), values strictly in {0, 1}."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {d.shape}")
        u = d.astype(np.uint8)
        if not np.array_equal(d.astype(np.float64), u.astype(np.float64)) or u.max(initial=0) > 1:
            raise ValueError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", u)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())

    def astype_bool(self) -> np.ndarray:
        return self.data.astype(bool)

    def __and__(self, other: "Mask") -> "Mask":
        return Mask(self.data & other.data)

    def __or__(self, other: "Mask") -> "Mask":
        return Mask(self.data | other.data)

    def __invert__(self) -> "Mask":
        return Mask(1 - self.data)

    @staticmethod
    def zeros(height: int, width: int) -> "Mask":
        return Mask(np.zeros((height, width), dtype=np.uint8))

    @staticmethod
    def ones(height: int, width: int) -> "Mask":
        return Mask(np.ones((height, width), dtype=np.uint8))


def apply_mask(img: Image, mask: Mask) -> Image:
    """img ⊙ mask: keep pixels where mask=1, zero elsewhere."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError("image/mask dimension mismatch")
    return Image(img.data * mask.data[:, :, None])


@dataclass(frozen=True)
class BilateralParams:
    """Parameters of the edge-preserving smoother used on color proxies."""

    spatial_sigma: float = 3.0
    range_sigma: float = 0.1
    radius: int = 6

    def __post_init__(self):
        if self.spatial_sigma <= 0 or self.range_sigma <= 0:
            raise ValueError("sigmas must be positive")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.radius < math.ceil(2 * self.spatial_sigma):
            raise ValueError(
                f"radius {self.radius} too small for spatial_sigma "
                f"{self.spatial_sigma} (need >= ceil(2*sigma))"
            )


@dataclass
class AvatarSample:
    """One procedurally generated face: image plus aligned ground truth."""

    image: Image
    segmap: "SegMap"
    keypoints: "KeypointSet"
    pose_prior: Image
    params: "AvatarParams" = field(repr=False, default=None)
