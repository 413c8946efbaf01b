"""Reference-image inversion into pseudo-token embeddings.

The adapter maps the frozen visual feature sequence to k pseudo-token
vectors appended after a template prompt's tokens. Training minimizes the
denoising objective through the frozen encoder and backend; only adapter
parameters update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..diffusion.backend import ToyDenoiser
from ..diffusion.codec import Latent, LatentCodec
from ..diffusion.schedule import NoiseSchedule
from ..imaging.types import Image, Mask
from .text import DualEncoder, PromptEmbedding, embed_prompt

DEFAULT_TEMPLATE = "a photo of a person with this hairstyle"


class InversionAdapter(nn.Module):
    """Visual feature sequence (L, d) -> k pseudo-token vectors (k, d)."""

    def __init__(self, dim: int = 64, k: int = 4, feature_len: int = 16, seed: int = 0):
        super().__init__()
        self.dim = dim
        self.k = k
        self.feature_len = feature_len
        torch.manual_seed(seed)
        self.net = nn.Sequential(
            nn.Linear(feature_len * dim, 128),
            nn.SiLU(),
            nn.Linear(128, k * dim),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if features.shape[-2:] != (self.feature_len, self.dim):
            raise ValueError(
                f"expected (..., {self.feature_len}, {self.dim}) features, "
                f"got {tuple(features.shape)}"
            )
        flat = features.reshape(*features.shape[:-2], self.feature_len * self.dim)
        out = self.net(flat)
        return out.reshape(*features.shape[:-2], self.k, self.dim)


def invert_reference(
    adapter: InversionAdapter,
    encoder: DualEncoder,
    ref_img: Image,
    template: str = DEFAULT_TEMPLATE,
) -> PromptEmbedding:
    """Template tokens followed by k pseudo-tokens predicted from the image."""
    if adapter.dim != encoder.dim:
        raise ValueError(
            f"adapter dim {adapter.dim} does not match encoder dim {encoder.dim}"
        )
    prefix = embed_prompt(encoder, template).tokens
    feats = torch.from_numpy(encoder.image_features(ref_img))
    with torch.no_grad():
        pseudo = adapter(feats).numpy().astype(np.float32)
    return PromptEmbedding(np.concatenate([prefix, pseudo], axis=0))


@dataclass(frozen=True)
class AdapterSample:
    """One training item: the face with only kept pixels visible, the mask of
    kept pixels, and the clean latent of the full image."""

    masked_face: Image
    keep_mask: Mask
    latent: Latent


@dataclass(frozen=True)
class AdapterTrainConfig:
    steps: int = 500
    batch: int = 4
    lr: float = 1e-3
    seed: int = 0
    template: str = DEFAULT_TEMPLATE


def train_inversion_adapter(
    adapter: InversionAdapter,
    encoder: DualEncoder,
    backend: ToyDenoiser,
    dataset: Sequence[AdapterSample],
    sched: NoiseSchedule,
    codec: LatentCodec,
    config: AdapterTrainConfig = AdapterTrainConfig(),
) -> InversionAdapter:
    """Denoising-loss training of the adapter alone; backend and encoder
    stay frozen (gradients flow through them, parameters never update)."""
    if not dataset:
        raise ValueError("dataset is empty")
    prev_flags = [p.requires_grad for p in backend.parameters()]
    for p in backend.parameters():
        p.requires_grad_(False)
    backend.eval()
    adapter.train()
    opt = torch.optim.Adam(adapter.parameters(), lr=config.lr)
    rng = np.random.default_rng(config.seed)

    prefix = embed_prompt(encoder, config.template).tokens
    prefix_t = torch.from_numpy(prefix)
    feats = [torch.from_numpy(encoder.image_features(s.masked_face)) for s in dataset]
    planes = []
    for s in dataset:
        inpaint = ~s.keep_mask
        m = inpaint.data.astype(np.float32)
        masked_latent = codec.encode(s.masked_face).data
        planes.append((s.latent.data, m, masked_latent))

    history: list[float] = []
    try:
        for _ in range(config.steps):
            idx = rng.integers(0, len(dataset), size=config.batch)
            t = rng.integers(0, sched.T, size=config.batch)
            ab = sched.alpha_bars[t].astype(np.float32)[:, None, None, None]
            z0 = np.stack([planes[i][0] for i in idx])
            eps = rng.standard_normal(z0.shape).astype(np.float32)
            z_t = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps
            gamma = np.concatenate(
                [
                    z_t,
                    np.stack([planes[i][1] for i in idx])[:, None],
                    np.stack([planes[i][2] for i in idx]),
                ],
                axis=1,
            )
            pseudo = adapter(torch.stack([feats[i] for i in idx]))
            full = torch.cat(
                [prefix_t[None].expand(config.batch, -1, -1), pseudo], dim=1
            )
            text = full.mean(dim=1)
            pred = backend(
                torch.from_numpy(gamma),
                torch.from_numpy(t.astype(np.float32)),
                text,
            )
            loss = F.mse_loss(pred, torch.from_numpy(eps))
            if not torch.isfinite(loss):
                raise RuntimeError("non-finite adapter loss")
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.append(float(loss.detach()))
    finally:
        for p, flag in zip(backend.parameters(), prev_flags):
            p.requires_grad_(flag)
    adapter.eval()
    adapter.train_history = history
    return adapter
