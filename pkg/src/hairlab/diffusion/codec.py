"""Latent codec contract and the lossless toy codec.

The toy codec keeps the latent at image resolution with 4 channels:
(R, G, B, luma) where luma = (R+G+B)/3. Decoding slices the RGB planes back
out, so round-trips are bit-exact and the map is linear. A spatially
compressing 4-channel code cannot reproduce 3 full-resolution planes
exactly, and the inpainting input layout fixes the channel count at 4, so
resolution is the dimension that gives: factor 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..imaging.types import Image


@dataclass(frozen=True)
class Latent:
    """Channel-first float32 tensor (C, h, w)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"latent must be (C, h, w), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("latent contains non-finite values")
        object.__setattr__(self, "data", arr.astype(np.float32, copy=False))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> int:
        return self.data.shape[1]

    @property
    def w(self) -> int:
        return self.data.shape[2]


@runtime_checkable
class LatentCodec(Protocol):
    factor: int
    channels: int

    def encode(self, img: Image) -> Latent: ...

    def decode(self, z: Latent) -> Image: ...


class ToyCodec:
    """Invertible linear codec: latent = (R, G, B, mean(RGB)) at image dims."""

    factor = 1
    channels = 4

    def encode(self, img: Image) -> Latent:
        rgb = img.to_rgb().data
        if rgb.shape[0] % self.factor or rgb.shape[1] % self.factor:
            raise ValueError("image dims must be divisible by the codec factor")
        planes = rgb.transpose(2, 0, 1)
        luma = planes.mean(axis=0, keepdims=True, dtype=np.float32)
        return Latent(np.concatenate([planes, luma], axis=0))

    def decode(self, z: Latent) -> Image:
        if z.channels != self.channels:
            raise ValueError(f"expected {self.channels}-channel latent, got {z.channels}")
        rgb = z.data[:3].transpose(1, 2, 0)
        return Image(np.clip(rgb, 0.0, 1.0).astype(np.float32))
