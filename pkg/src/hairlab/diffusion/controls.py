"""Auxiliary control signals injected as additive residuals on the noise
prediction. Encoders end in a zero-initialized conv, so an untrained control
is an exact no-op and training can only grow its influence from zero."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..imaging.resample import resize_image
from ..imaging.types import Image, Mask
from .codec import Latent

CONTROL_KINDS = ("canny_edge", "pose_keypoints")


@dataclass(frozen=True)
class ControlSignal:
    kind: str
    payload: Image | Mask
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in CONTROL_KINDS:
            raise ValueError(f"unknown control kind: {self.kind!r}")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("control weight must be finite and >= 0")

    def plane(self, h: int, w: int) -> np.ndarray:
        """Payload as a single (h, w) float32 plane at latent dims."""
        if isinstance(self.payload, Mask):
            img = Image(
                np.clip(self.payload.data.astype(np.float32), 0, 1)[:, :, None]
            )
        else:
            img = self.payload
        if img.height != h or img.width != w:
            img = resize_image(img, h, w)
        return np.ascontiguousarray(img.gray(), dtype=np.float32)


def _zero_final(module: nn.Conv2d) -> nn.Conv2d:
    nn.init.zeros_(module.weight)
    nn.init.zeros_(module.bias)
    return module


class ControlBank(nn.Module):
    """One small conv encoder per control kind, all mapping a 1-channel
    payload plane to a 4-channel latent residual."""

    def __init__(self, latent_channels: int = 4, width: int = 16):
        super().__init__()
        self.encoders = nn.ModuleDict(
            {
                kind: nn.Sequential(
                    nn.Conv2d(1, width, 3, padding=1),
                    nn.SiLU(),
                    nn.Conv2d(width, width, 3, padding=1),
                    nn.SiLU(),
                    _zero_final(nn.Conv2d(width, latent_channels, 1)),
                )
                for kind in CONTROL_KINDS
            }
        )

    def residual(
        self, controls: list[ControlSignal], h: int, w: int, dtype: torch.dtype
    ) -> torch.Tensor | None:
        """Weighted sum of encoded controls, or None when nothing is active."""
        total: torch.Tensor | None = None
        for ctrl in controls:
            if ctrl.weight == 0.0:
                continue
            plane = torch.from_numpy(ctrl.plane(h, w)).to(dtype)[None, None]
            r = self.encoders[ctrl.kind](plane)[0] * ctrl.weight
            total = r if total is None else total + r
        return total


def apply_controls(
    base_prediction: Latent,
    controls: list[ControlSignal],
    bank: ControlBank,
) -> Latent:
    """base + sum of weighted control residuals; no active controls returns
    the base prediction object unchanged."""
    for ctrl in controls:
        if ctrl.kind not in CONTROL_KINDS:
            raise ValueError(f"unknown control kind: {ctrl.kind!r}")
    active = [c for c in controls if c.weight > 0.0]
    if not active:
        return base_prediction
    with torch.no_grad():
        res = bank.residual(active, base_prediction.h, base_prediction.w, torch.float32)
    if res is None:
        return base_prediction
    return Latent(base_prediction.data + res.numpy().astype(np.float32))
