"""Flow-then-refine warping network with a patch discriminator.

The flow stage predicts a sampling grid that deforms the augmented hair
toward the target pose; the refinement stage paints the rest of the frame
and predicts an alpha plane that composites warped hair over the painted
background.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..tensorio import load_tensors, save_tensors
from .dataset import WarpConditioning

COND_CHANNELS = 8  # hair rgb + segmap plane + pose prior + face rgb
_COVER_EPS = 1.0 / 255.0


def conditioning_tensor(cond: WarpConditioning) -> np.ndarray:
    """(8, H, W) float32 stack of the conditioning planes."""
    seg = cond.agnostic_segmap
    seg_plane = seg.labels.astype(np.float32) / max(len(seg.label_set) - 1, 1)
    return np.concatenate(
        [
            cond.augmented_hair.to_rgb().data.transpose(2, 0, 1),
            seg_plane[None],
            cond.pose_prior.data.transpose(2, 0, 1),
            cond.agnostic_face.to_rgb().data.transpose(2, 0, 1),
        ],
        axis=0,
    )


class _UNet(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, base: int, scales: int):
        super().__init__()
        if scales < 2:
            raise ValueError("need at least 2 scales")
        widths = [base * (2**i) for i in range(scales)]
        self.inc = nn.Conv2d(in_ch, widths[0], 3, padding=1)
        self.downs = nn.ModuleList(
            nn.Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1)
            for i in range(scales - 1)
        )
        self.enc = nn.ModuleList(_conv_block(w) for w in widths)
        self.ups = nn.ModuleList(
            nn.Conv2d(widths[i + 1], widths[i], 3, padding=1)
            for i in range(scales - 1)
        )
        self.fuse = nn.ModuleList(
            nn.Conv2d(2 * widths[i], widths[i], 3, padding=1)
            for i in range(scales - 1)
        )
        self.out = nn.Conv2d(widths[0], out_ch, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.enc[0](self.inc(x))
        skips = [h]
        for i, down in enumerate(self.downs):
            h = self.enc[i + 1](down(h))
            if i < len(self.downs) - 1:
                skips.append(h)
        for i in reversed(range(len(self.ups))):
            h = self.ups[i](F.interpolate(h, scale_factor=2, mode="nearest"))
            h = self.fuse[i](torch.cat([h, skips[i]], dim=1))
        return self.out(h)


def _conv_block(ch: int) -> nn.Module:
    return nn.Sequential(
        nn.GroupNorm(8, ch), nn.SiLU(), nn.Conv2d(ch, ch, 3, padding=1)
    )


class WarpModel(nn.Module):
    """Generator (flow + refine) and discriminator in one module."""

    def __init__(self, base: int = 32, scales: int = 4, seed: int = 0):
        super().__init__()
        if base % 8:
            raise ValueError("base width must be divisible by 8")
        torch.manual_seed(seed)
        self.base = base
        self.scales = scales
        self.flow_net = _UNet(COND_CHANNELS, 2, base, scales)
        self.refine_net = _UNet(COND_CHANNELS + 1, 4, base, scales)
        self.disc = nn.Sequential(
            nn.Conv2d(5, base, 4, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(base, 2 * base, 4, stride=2, padding=1),
            nn.GroupNorm(8, 2 * base),
            nn.SiLU(),
            nn.Conv2d(2 * base, 1, 3, padding=1),
        )
        # Identity prior: zero flow and a pass-through alpha logit at init,
        # so the untrained generator reproduces its input hair and training
        # only learns deviations. Keeps unseen (e.g. solid-color) references
        # intact instead of repainting them.
        nn.init.zeros_(self.flow_net.out.weight)
        nn.init.zeros_(self.flow_net.out.bias)
        with torch.no_grad():
            self.refine_net.out.bias[3] = 2.0
        self.iterations = 0

    def generator_parameters(self):
        yield from self.flow_net.parameters()
        yield from self.refine_net.parameters()

    def warp_hair(self, cond: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Deform the hair planes by the predicted flow; returns the warped
        rgb and the warped coverage plane."""
        b, _, h, w = cond.shape
        flow = torch.tanh(self.flow_net(cond)) * 0.5
        ys = torch.linspace(-1.0, 1.0, h, dtype=cond.dtype)
        xs = torch.linspace(-1.0, 1.0, w, dtype=cond.dtype)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        grid = torch.stack([gx, gy], dim=-1)[None].expand(b, -1, -1, -1)
        grid = grid + flow.permute(0, 2, 3, 1)
        hair = cond[:, :3]
        cover = (hair.amax(dim=1, keepdim=True) > _COVER_EPS).to(cond.dtype)
        warped = F.grid_sample(
            hair, grid, mode="bilinear", padding_mode="zeros", align_corners=True
        )
        cover_w = F.grid_sample(
            cover, grid, mode="bilinear", padding_mode="zeros", align_corners=True
        )
        return warped, cover_w

    def generate(
        self, cond: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(output, warped hair, alpha); output = alpha*warped + (1-alpha)*painted."""
        warped, cover_w = self.warp_hair(cond)
        ref_in = torch.cat([warped, cover_w, cond[:, 3:]], dim=1)
        ref_out = self.refine_net(ref_in)
        rgb = torch.sigmoid(ref_out[:, :3])
        alpha = torch.sigmoid(ref_out[:, 3:4])
        out = alpha * warped + (1.0 - alpha) * rgb
        return out, warped, alpha

    def discriminate(self, img: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        """Patch logits conditioned on the segmap and pose planes."""
        return self.disc(torch.cat([img, cond[:, 3:5]], dim=1))

    @torch.no_grad()
    def infer(self, cond_np: np.ndarray) -> np.ndarray:
        """(3, H, W) conditioning stack -> (H, W, 3) image array in [0,1]."""
        self.eval()
        out, _, _ = self.generate(torch.from_numpy(cond_np[None]))
        return np.clip(out[0].numpy().transpose(1, 2, 0), 0.0, 1.0).astype(np.float32)

    def save(self, path: str | Path, extra_meta: dict | None = None) -> None:
        tensors = {k: v.detach().cpu().numpy() for k, v in self.state_dict().items()}
        meta = {
            "arch": {"base": self.base, "scales": self.scales},
            "iterations": self.iterations,
        }
        if extra_meta:
            meta.update(extra_meta)
        save_tensors(path, tensors, meta)

    @classmethod
    def load(cls, path: str | Path) -> "WarpModel":
        tensors, meta = load_tensors(path)
        arch = meta.get("arch", {})
        model = cls(base=int(arch.get("base", 32)), scales=int(arch.get("scales", 4)))
        model.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in tensors.items()})
        model.iterations = int(meta.get("iterations", 0))
        model.eval()
        return model
