"""Dual text/image encoder with a desk-scale implementation.

The toy encoder maps whitespace tokens to fixed hash-seeded base vectors and
runs each through a trainable tokenwise linear head (the only trainable text
parameters). The image side is a frozen seeded patch projection producing a
feature sequence. Both sides pool to the same d-dimensional space for
similarity scoring.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import torch
from torch import nn

from ..imaging.resample import resize_image
from ..imaging.types import Image

MAX_TOKENS = 16
UNCOND_TOKEN = "<uncond>"
EMBED_DIM = 64
PATCH_GRID = 4
_PATCH_RES = 32


@dataclass(frozen=True)
class PromptEmbedding:
    """Sequence of d-dimensional token vectors."""

    tokens: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.tokens, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError("tokens must be (length, d)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite values")
        object.__setattr__(self, "tokens", arr)

    @property
    def length(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    def pooled(self) -> np.ndarray:
        return self.tokens.mean(axis=0)


@runtime_checkable
class DualEncoder(Protocol):
    dim: int

    def token_vectors(self, text: str) -> np.ndarray: ...

    def image_features(self, img: Image) -> np.ndarray: ...


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens, truncated to the fixed budget; empty
    text maps to the designated unconditional token."""
    words = text.lower().split()
    if not words:
        return [UNCOND_TOKEN]
    return words[:MAX_TOKENS]


def _hash_vector(token: str, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


class ToyDualEncoder(nn.Module):
    """Trainable text head over hash-seeded token vectors; frozen image side."""

    def __init__(self, dim: int = EMBED_DIM, seed: int = 0):
        super().__init__()
        self.dim = dim
        torch.manual_seed(seed)
        self.text_head = nn.Linear(dim, dim)
        # Start from identity so untrained embeddings keep hash geometry.
        with torch.no_grad():
            self.text_head.weight.copy_(torch.eye(dim))
            self.text_head.bias.zero_()
        rng = np.random.default_rng(seed + 7919)
        patch_dim = (_PATCH_RES // PATCH_GRID) ** 2 * 3
        proj = rng.standard_normal((patch_dim, dim)) / np.sqrt(patch_dim)
        self.register_buffer("visual_proj", torch.from_numpy(proj.astype(np.float32)))

    def token_vectors(self, text: str) -> np.ndarray:
        base = np.stack([_hash_vector(tok, self.dim) for tok in tokenize(text)])
        with torch.no_grad():
            out = self.text_head(torch.from_numpy(base))
        return out.numpy().astype(np.float32)

    def token_vectors_torch(self, text: str) -> torch.Tensor:
        """Differentiable path through the text head for training."""
        base = np.stack([_hash_vector(tok, self.dim) for tok in tokenize(text)])
        return self.text_head(torch.from_numpy(base))

    def image_features(self, img: Image) -> np.ndarray:
        """Frozen (PATCH_GRID^2, dim) feature sequence from RGB patches."""
        rgb = img.to_rgb()
        if rgb.height != _PATCH_RES or rgb.width != _PATCH_RES:
            rgb = resize_image(rgb, _PATCH_RES, _PATCH_RES)
        ps = _PATCH_RES // PATCH_GRID
        feats = []
        data = rgb.data.astype(np.float32)
        for gy in range(PATCH_GRID):
            for gx in range(PATCH_GRID):
                patch = data[gy * ps : (gy + 1) * ps, gx * ps : (gx + 1) * ps]
                feats.append(patch.reshape(-1))
        with torch.no_grad():
            seq = torch.from_numpy(np.stack(feats)) @ self.visual_proj
        return seq.numpy().astype(np.float32)

    def image_vector(self, img: Image) -> np.ndarray:
        """Pooled unit-norm image feature for similarity scoring."""
        f = self.image_features(img).mean(axis=0)
        return f / max(np.linalg.norm(f), 1e-12)

    def text_checksum(self) -> float:
        return float(
            sum(p.detach().abs().sum().item() for p in self.text_head.parameters())
        )

    def visual_checksum(self) -> float:
        return float(self.visual_proj.abs().sum().item())


def embed_prompt(encoder: DualEncoder, text: str) -> PromptEmbedding:
    """Deterministic token-vector sequence; empty text yields the designated
    unconditional embedding, distinct from every real token."""
    return PromptEmbedding(encoder.token_vectors(text))
