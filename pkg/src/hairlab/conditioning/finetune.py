"""Contrastive fine-tuning of the text head against frozen image features.

The pair set is expanded by rotations and optional mirroring before
training; the symmetric cross-entropy objective aligns pooled text vectors
with pooled image vectors in the shared space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from ..imaging.types import Image
from .text import ToyDualEncoder, _hash_vector, tokenize


@dataclass(frozen=True)
class FinetuneConfig:
    steps: int = 200
    lr: float = 1e-2
    temperature: float = 0.07
    seed: int = 0


def _rotate_image(img: Image, degrees: float) -> Image:
    deg = degrees % 360.0
    data = img.data
    if deg % 90.0 == 0.0:
        out = np.rot90(data, k=int(deg // 90.0), axes=(0, 1)).copy()
    else:
        out = ndimage.rotate(
            data, deg, axes=(1, 0), reshape=False, order=1, mode="constant"
        )
    return Image(np.clip(out, 0.0, 1.0).astype(np.float32))


def augment_pairs(
    pairs: Sequence[tuple[str, Image]],
    rotations: Sequence[float],
    mirror: bool,
) -> list[tuple[str, Image]]:
    """|pairs| x |rotations| x (2 if mirror else 1) augmented pairs."""
    rotations = list(rotations) or [0.0]
    out: list[tuple[str, Image]] = []
    for text, img in pairs:
        for deg in rotations:
            rotated = _rotate_image(img, deg)
            out.append((text, rotated))
            if mirror:
                out.append((text, Image(rotated.data[:, ::-1].copy())))
    return out


def finetune_dual_encoder(
    encoder: ToyDualEncoder,
    pairs: Sequence[tuple[str, Image]],
    rotations: Sequence[float] = (0.0,),
    mirror: bool = False,
    config: FinetuneConfig = FinetuneConfig(),
) -> ToyDualEncoder:
    """Updates only the text head; the visual side is frozen by construction."""
    if len(pairs) < 2:
        raise ValueError("contrastive training needs at least 2 pairs")
    aug = augment_pairs(pairs, rotations, mirror)

    image_feats = np.stack([encoder.image_vector(img) for _, img in aug])
    image_t = torch.from_numpy(image_feats.astype(np.float32))
    # The text head is linear, so pooling commutes with it: encode the mean
    # of the base token vectors once and push it through the head per step.
    base_means = np.stack(
        [
            np.stack([_hash_vector(tok, encoder.dim) for tok in tokenize(text)]).mean(0)
            for text, _ in aug
        ]
    )
    base_t = torch.from_numpy(base_means.astype(np.float32))

    torch.manual_seed(config.seed)
    encoder.train()
    opt = torch.optim.Adam(encoder.text_head.parameters(), lr=config.lr)
    labels = torch.arange(len(aug))
    history: list[float] = []
    for _ in range(config.steps):
        text_feats = encoder.text_head(base_t)
        text_feats = text_feats / text_feats.norm(dim=1, keepdim=True).clamp_min(1e-12)
        logits = text_feats @ image_t.T / config.temperature
        loss = 0.5 * (
            F.cross_entropy(logits, labels) + F.cross_entropy(logits.T, labels)
        )
        if not torch.isfinite(loss):
            raise RuntimeError("non-finite contrastive loss")
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))
    encoder.eval()
    encoder.train_history = history
    return encoder


def retrieval_top1(
    encoder: ToyDualEncoder, pairs: Sequence[tuple[str, Image]]
) -> int:
    """How many texts rank their own image first."""
    image_feats = np.stack([encoder.image_vector(img) for _, img in pairs])
    hits = 0
    for i, (text, _) in enumerate(pairs):
        t = encoder.token_vectors(text).mean(axis=0)
        t = t / max(np.linalg.norm(t), 1e-12)
        sims = image_feats @ t
        if int(np.argmax(sims)) == i:
            hits += 1
    return hits
