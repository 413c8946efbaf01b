"""Denoiser backend contract and a small trainable U-Net denoiser.

The toy net is a 3-scale residual U-Net (base width 32) over the 9-channel
inpainting input. Timestep and pooled text features enter every block
through feature-wise scale/shift; control residuals are added to the final
noise prediction so zero-weight or untrained controls change nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..tensorio import load_tensors, save_tensors
from .codec import Latent
from .controls import ControlBank, ControlSignal
from .inputs import InpaintInput


def pool_embedding(embedding, dim: int) -> np.ndarray:
    """Mean over token vectors; None maps to the zero vector."""
    if embedding is None:
        return np.zeros(dim, dtype=np.float32)
    tokens = getattr(embedding, "tokens", embedding)
    arr = np.asarray(tokens, dtype=np.float32)
    if arr.ndim == 1:
        vec = arr
    elif arr.ndim == 2:
        vec = arr.mean(axis=0)
    else:
        raise ValueError(f"embedding must be (d,) or (L, d), got shape {arr.shape}")
    if vec.shape != (dim,):
        raise ValueError(f"embedding dim {vec.shape} does not match backend dim {dim}")
    return vec


@dataclass(frozen=True)
class ConditioningBundle:
    """Prompt features plus controls and guidance weight for one sampling run."""

    cond: object | None = None
    uncond: object | None = None
    controls: Sequence[ControlSignal] = field(default_factory=tuple)
    guidance_scale: float = 7.5


@runtime_checkable
class DenoiserBackend(Protocol):
    def predict_noise(
        self,
        gamma: InpaintInput,
        t: int,
        embedding=None,
        controls: Sequence[ControlSignal] = (),
    ) -> Latent: ...


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos position features of the raw step index."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1)
    ).to(t.dtype)
    args = t[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class _ResBlock(nn.Module):
    def __init__(self, ch: int, cond_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(8, ch)
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(8, ch)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.film = nn.Linear(cond_dim, 2 * ch)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        scale, shift = self.film(cond).chunk(2, dim=-1)
        h = h * (1.0 + scale[..., None, None]) + shift[..., None, None]
        return x + self.conv2(F.silu(self.norm2(h)))


class ToyDenoiser(nn.Module):
    """Trainable desk-scale denoiser implementing the backend contract."""

    def __init__(
        self,
        base: int = 32,
        text_dim: int = 64,
        t_dim: int = 64,
        in_channels: int = 9,
        latent_channels: int = 4,
        seed: int = 0,
    ):
        super().__init__()
        if base % 8:
            raise ValueError("base width must be divisible by 8 for group norm")
        torch.manual_seed(seed)
        self.base = base
        self.text_dim = text_dim
        self.t_dim = t_dim
        self.in_channels = in_channels
        self.latent_channels = latent_channels
        cond_dim = 128
        b = base
        self.cond_mlp = nn.Sequential(
            nn.Linear(t_dim + text_dim, cond_dim), nn.SiLU(),
            nn.Linear(cond_dim, cond_dim),
        )
        self.in_conv = nn.Conv2d(in_channels, b, 3, padding=1)
        self.enc1 = _ResBlock(b, cond_dim)
        self.down1 = nn.Conv2d(b, 2 * b, 3, stride=2, padding=1)
        self.enc2 = _ResBlock(2 * b, cond_dim)
        self.down2 = nn.Conv2d(2 * b, 4 * b, 3, stride=2, padding=1)
        self.mid = _ResBlock(4 * b, cond_dim)
        self.up2 = nn.Conv2d(4 * b, 2 * b, 3, padding=1)
        self.fuse2 = nn.Conv2d(4 * b, 2 * b, 3, padding=1)
        self.dec2 = _ResBlock(2 * b, cond_dim)
        self.up1 = nn.Conv2d(2 * b, b, 3, padding=1)
        self.fuse1 = nn.Conv2d(2 * b, b, 3, padding=1)
        self.dec1 = _ResBlock(b, cond_dim)
        self.out_norm = nn.GroupNorm(8, b)
        self.out_conv = nn.Conv2d(b, latent_channels, 3, padding=1)
        self.controls = ControlBank(latent_channels)

    def forward(
        self,
        x: torch.Tensor,
        t: torch.Tensor,
        text: torch.Tensor,
        control_planes: Sequence[tuple[str, torch.Tensor, float]] = (),
    ) -> torch.Tensor:
        """x: (B, 9, h, w) with h, w divisible by 4; t: (B,); text: (B, text_dim).
        control_planes entries are (kind, (B, 1, h, w) plane, weight)."""
        if x.shape[-1] % 4 or x.shape[-2] % 4:
            raise ValueError("spatial dims must be divisible by 4")
        cond = self.cond_mlp(
            torch.cat([sinusoidal_embedding(t.to(x.dtype), self.t_dim), text], dim=1)
        )
        h0 = self.in_conv(x)
        h1 = self.enc1(h0, cond)
        h2 = self.enc2(self.down1(h1), cond)
        hm = self.mid(self.down2(h2), cond)
        u = self.up2(F.interpolate(hm, scale_factor=2, mode="nearest"))
        u = self.dec2(self.fuse2(torch.cat([u, h2], dim=1)), cond)
        u = self.up1(F.interpolate(u, scale_factor=2, mode="nearest"))
        u = self.dec1(self.fuse1(torch.cat([u, h1], dim=1)), cond)
        out = self.out_conv(F.silu(self.out_norm(u)))
        for kind, plane, weight in control_planes:
            if weight == 0.0:
                continue
            out = out + self.controls.encoders[kind](plane) * weight
        return out

    @torch.no_grad()
    def predict_noise(
        self,
        gamma: InpaintInput,
        t: int,
        embedding=None,
        controls: Sequence[ControlSignal] = (),
    ) -> Latent:
        self.eval()
        x = torch.from_numpy(gamma.stacked())[None]
        text = torch.from_numpy(pool_embedding(embedding, self.text_dim))[None]
        planes = [
            (c.kind, torch.from_numpy(c.plane(gamma.z_t.h, gamma.z_t.w))[None, None], c.weight)
            for c in controls
            if c.weight > 0.0
        ]
        out = self.forward(x, torch.tensor([float(t)]), text, planes)
        return Latent(out[0].numpy().astype(np.float32))

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        tensors = {k: v.detach().cpu().numpy() for k, v in self.state_dict().items()}
        meta = {
            "arch": {
                "base": self.base,
                "text_dim": self.text_dim,
                "t_dim": self.t_dim,
                "in_channels": self.in_channels,
                "latent_channels": self.latent_channels,
            }
        }
        if extra_meta:
            meta.update(extra_meta)
        save_tensors(path, tensors, meta)

    @classmethod
    def load(cls, path: str | Path) -> "ToyDenoiser":
        tensors, meta = load_tensors(path)
        arch = meta.get("arch", {})
        model = cls(
            base=int(arch.get("base", 32)),
            text_dim=int(arch.get("text_dim", 64)),
            t_dim=int(arch.get("t_dim", 64)),
            in_channels=int(arch.get("in_channels", 9)),
            latent_channels=int(arch.get("latent_channels", 4)),
        )
        state = {k: torch.from_numpy(v.copy()) for k, v in tensors.items()}
        model.load_state_dict(state)
        model.eval()
        return model
