"""Noise-prediction training for the toy denoiser with random repair masks.

Each step draws images, timesteps, Gaussian noise, and a random mask; the
net sees the noisy latent stacked with the mask and the encoded masked
image, and regresses the noise. Captions condition the net through pooled
embeddings, dropped to the unconditional embedding at a fixed rate so
guided sampling has a trained unconditional branch. Edge-map control
encoders train jointly on a random subset of steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..imaging.edges import canny_edges
from ..imaging.types import Image
from .backend import ToyDenoiser
from .codec import LatentCodec
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 3000
    batch: int = 4
    lr: float = 2e-4
    seed: int = 0
    base: int = 32
    text_dim: int = 64
    cond_dropout: float = 0.1
    control_prob: float = 0.5
    divergence_factor: float = 10.0
    divergence_patience: int = 500
    out_path: str | None = None
    loss_csv: str | None = None


def random_repair_mask(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Union of 1-3 random rectangles/ellipses, uint8 {0,1}."""
    mask = np.zeros((h, w), dtype=np.uint8)
    for _ in range(int(rng.integers(1, 4))):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        ry = rng.uniform(0.10, 0.40) * h
        rx = rng.uniform(0.10, 0.40) * w
        if rng.random() < 0.5:
            y0, y1 = int(max(0, cy - ry)), int(min(h, cy + ry))
            x0, x1 = int(max(0, cx - rx)), int(min(w, cx + rx))
            mask[y0:y1, x0:x1] = 1
        else:
            yy, xx = np.mgrid[0:h, 0:w]
            mask |= (((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0).astype(
                np.uint8
            )
    if not mask.any():
        mask[h // 4 : 3 * h // 4, w // 4 : 3 * w // 4] = 1
    return mask


def train_toy_backend(
    images: Sequence[Image],
    codec: LatentCodec,
    sched: NoiseSchedule,
    config: TrainConfig = TrainConfig(),
    embeddings: np.ndarray | None = None,
    uncond_embedding: np.ndarray | None = None,
) -> ToyDenoiser:
    """Returns the trained net with per-step losses on ``train_history``.

    ``embeddings`` is an (N, text_dim) array of pooled caption features
    aligned with ``images``; omitted means unconditional training.
    """
    if not images:
        raise ValueError("dataset is empty")
    n = len(images)
    if embeddings is not None:
        embeddings = np.asarray(embeddings, dtype=np.float32)
        if embeddings.shape != (n, config.text_dim):
            raise ValueError(
                f"embeddings must be ({n}, {config.text_dim}), got {embeddings.shape}"
            )
    if uncond_embedding is None:
        uncond_embedding = np.zeros(config.text_dim, dtype=np.float32)
    uncond_embedding = np.asarray(uncond_embedding, dtype=np.float32)

    rng = np.random.default_rng(config.seed)
    model = ToyDenoiser(base=config.base, text_dim=config.text_dim, seed=config.seed)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)

    z0 = np.stack([codec.encode(img).data for img in images])
    edge_planes = np.stack(
        [canny_edges(img).data.astype(np.float32) for img in images]
    )[:, None]
    h, w = z0.shape[2], z0.shape[3]
    alpha_bars = sched.alpha_bars

    history: list[float] = []
    initial_loss: float | None = None
    bad_streak = 0

    for step in range(config.steps):
        idx = rng.integers(0, n, size=config.batch)
        t = rng.integers(0, sched.T, size=config.batch)
        eps = rng.standard_normal((config.batch, 4, h, w)).astype(np.float32)
        ab = alpha_bars[t].astype(np.float32)[:, None, None, None]
        z_t = np.sqrt(ab) * z0[idx] + np.sqrt(1.0 - ab) * eps

        gamma = np.empty((config.batch, 9, h, w), dtype=np.float32)
        gamma[:, :4] = z_t
        for j, i in enumerate(idx):
            mask = random_repair_mask(rng, images[i].height, images[i].width)
            keep = (1.0 - mask).astype(np.float32)[:, :, None]
            masked = Image(images[i].data * keep)
            gamma[j, 4] = mask.astype(np.float32)
            gamma[j, 5:] = codec.encode(masked).data

        if embeddings is None:
            text = np.tile(uncond_embedding, (config.batch, 1))
        else:
            text = embeddings[idx].copy()
            drop = rng.random(config.batch) < config.cond_dropout
            text[drop] = uncond_embedding

        planes: list[tuple[str, torch.Tensor, float]] = []
        if rng.random() < config.control_prob:
            planes = [("canny_edge", torch.from_numpy(edge_planes[idx]), 1.0)]

        opt.zero_grad()
        pred = model(
            torch.from_numpy(gamma),
            torch.from_numpy(t.astype(np.float32)),
            torch.from_numpy(text),
            planes,
        )
        loss = F.mse_loss(pred, torch.from_numpy(eps))
        loss.backward()
        opt.step()

        val = float(loss.detach())
        if not np.isfinite(val):
            raise RuntimeError(f"non-finite loss at step {step}")
        history.append(val)
        if initial_loss is None:
            initial_loss = val
        if val > config.divergence_factor * initial_loss:
            bad_streak += 1
            if bad_streak >= config.divergence_patience:
                raise RuntimeError(
                    f"diverged: loss {val:.4g} above "
                    f"{config.divergence_factor}x initial for "
                    f"{bad_streak} consecutive steps"
                )
        else:
            bad_streak = 0

    model.eval()
    model.train_history = history
    if config.loss_csv:
        with open(config.loss_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "loss"])
            writer.writerows((i, f"{v:.8f}") for i, v in enumerate(history))
    if config.out_path:
        Path(config.out_path).parent.mkdir(parents=True, exist_ok=True)
        model.save(
            config.out_path,
            extra_meta={
                "train": {
                    "steps": config.steps,
                    "batch": config.batch,
                    "lr": config.lr,
                    "seed": config.seed,
                    "loss_first": history[0],
                    "loss_last": history[-1],
                }
            },
        )
    return model


def gradient_check(
    model: ToyDenoiser,
    x: np.ndarray,
    t: np.ndarray,
    text: np.ndarray,
    target: np.ndarray,
    param_name: str = "mid.conv1.weight",
    h: float = 1e-5,
) -> float:
    """Relative error between the analytic gradient of one weight and a
    central finite difference, both in float64."""
    model = model.double()

    def loss_value() -> torch.Tensor:
        pred = model(
            torch.from_numpy(x).double(),
            torch.from_numpy(t).double(),
            torch.from_numpy(text).double(),
        )
        return F.mse_loss(pred, torch.from_numpy(target).double())

    param = dict(model.named_parameters())[param_name]
    model.zero_grad()
    loss_value().backward()
    analytic = float(param.grad.reshape(-1)[0])

    with torch.no_grad():
        flat = param.reshape(-1)
        orig = float(flat[0])
        flat[0] = orig + h
        up = float(loss_value())
        flat[0] = orig - h
        down = float(loss_value())
        flat[0] = orig
    fd = (up - down) / (2.0 * h)
    model.float()
    return abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-12)
