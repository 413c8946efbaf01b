"""Assembly of the 9-channel inpainting input: noisy latent, resampled
inpaint mask, and the encoded masked image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging.resample import downsample_mask
from ..imaging.types import Image, Mask
from .codec import Latent, LatentCodec


@dataclass(frozen=True)
class InpaintInput:
    """z_t (4ch) | m (1ch) | masked latent (4ch); always 9 channels stacked."""

    z_t: Latent
    m: np.ndarray
    masked_latent: Latent

    def __post_init__(self) -> None:
        m = np.asarray(self.m, dtype=np.float32)
        if m.ndim != 2:
            raise ValueError("mask plane must be 2-D")
        if self.z_t.channels != 4 or self.masked_latent.channels != 4:
            raise ValueError("latents must have 4 channels")
        if (
            self.z_t.data.shape[1:] != m.shape
            or self.masked_latent.data.shape[1:] != m.shape
        ):
            raise ValueError("spatial dims of z_t, mask, and masked latent differ")
        object.__setattr__(self, "m", m)

    @property
    def channels(self) -> int:
        return self.z_t.channels + 1 + self.masked_latent.channels

    def stacked(self) -> np.ndarray:
        """(9, h, w) float32 network input."""
        return np.concatenate(
            [self.z_t.data, self.m[None], self.masked_latent.data], axis=0
        )


def assemble_inpaint_input(
    z_t: Latent,
    inpaint_mask: Mask,
    masked_img: Image,
    codec: LatentCodec,
) -> InpaintInput:
    if (
        masked_img.height != inpaint_mask.data.shape[0]
        or masked_img.width != inpaint_mask.data.shape[1]
    ):
        raise ValueError("mask and masked image dims differ")
    m = downsample_mask(inpaint_mask, z_t.h, z_t.w, threshold=0.5)
    masked_latent = codec.encode(masked_img)
    if masked_latent.data.shape != z_t.data.shape:
        raise ValueError("encoded masked image does not match z_t dims")
    return InpaintInput(z_t=z_t, m=m.data.astype(np.float32), masked_latent=masked_latent)
