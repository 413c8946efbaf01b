"""Adversarial training loop for the warping network."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..imaging.types import Mask
from .dataset import WarpSample
from .model import WarpModel, conditioning_tensor


@dataclass(frozen=True)
class WarpTrainConfig:
    iterations: int = 2000
    batch: int = 8
    gen_lr: float = 2e-4
    disc_lr: float = 2e-4
    adv_weight: float = 0.1
    alpha_weight: float = 0.0
    seed: int = 0
    base: int = 32
    scales: int = 4
    out_path: str | None = None
    loss_csv: str | None = None

    def __post_init__(self):
        if self.iterations < 0 or self.batch < 1:
            raise ValueError("bad iteration/batch counts")
        if self.gen_lr <= 0 or self.disc_lr <= 0:
            raise ValueError("learning rates must be positive")


def masked_l1(pred: np.ndarray, target: np.ndarray, mask: Mask) -> float:
    """Mean absolute error over mask=1 pixels (all channels)."""
    if pred.shape != target.shape:
        raise ValueError("prediction/target shape mismatch")
    sel = mask.astype_bool()
    if pred.shape[:2] != sel.shape:
        raise ValueError("mask dimension mismatch")
    if not sel.any():
        raise ValueError("mask selects no pixels")
    diff = np.abs(pred.astype(np.float64) - target.astype(np.float64))
    return float(diff[sel].mean())


def train_warping(
    dataset: Sequence[WarpSample],
    config: WarpTrainConfig = WarpTrainConfig(),
    model: WarpModel | None = None,
) -> WarpModel:
    """Alternating discriminator/generator updates; returns the generator.

    Generator loss is reconstruction L1 plus a non-saturating adversarial
    term, optionally plus a supervision term tying the alpha plane to the
    warped hair coverage (off by default). Loss rows are
    (iteration, gen_loss, disc_loss).
    """
    if not dataset:
        raise ValueError("dataset is empty")
    if model is None:
        model = WarpModel(base=config.base, scales=config.scales, seed=config.seed)
    conds = torch.from_numpy(
        np.stack([conditioning_tensor(s.conditioning) for s in dataset])
    )
    targets = torch.from_numpy(
        np.stack([s.target.to_rgb().data.transpose(2, 0, 1) for s in dataset])
    )
    rng = np.random.default_rng(config.seed)
    opt_g = torch.optim.Adam(model.generator_parameters(), lr=config.gen_lr)
    opt_d = torch.optim.Adam(model.disc.parameters(), lr=config.disc_lr)
    history: list[tuple[int, float, float]] = []
    model.train()
    for it in range(config.iterations):
        idx = rng.integers(0, len(dataset), size=min(config.batch, len(dataset)))
        cond = conds[idx]
        real = targets[idx]

        with torch.no_grad():
            fake_detached, _, _ = model.generate(cond)
        d_real = model.discriminate(real, cond)
        d_fake = model.discriminate(fake_detached, cond)
        disc_loss = (F.softplus(-d_real) + F.softplus(d_fake)).mean()
        opt_d.zero_grad()
        disc_loss.backward()
        opt_d.step()

        fake, warped, alpha = model.generate(cond)
        adv = F.softplus(-model.discriminate(fake, cond)).mean()
        recon = F.l1_loss(fake, real)
        gen_loss = recon + config.adv_weight * adv
        if config.alpha_weight > 0:
            cover_w = (warped.detach().amax(dim=1, keepdim=True) > 1e-3).float()
            alpha_loss = F.binary_cross_entropy(alpha.clamp(1e-6, 1 - 1e-6), cover_w)
            gen_loss = gen_loss + config.alpha_weight * alpha_loss
        opt_g.zero_grad()
        gen_loss.backward()
        opt_g.step()

        g = float(gen_loss.detach())
        d = float(disc_loss.detach())
        if not (np.isfinite(g) and np.isfinite(d)):
            raise RuntimeError(f"non-finite loss at iteration {it}")
        history.append((it, g, d))
        model.iterations += 1

    model.eval()
    model.train_history = history
    if config.loss_csv is not None:
        with open(config.loss_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "gen_loss", "disc_loss"])
            writer.writerows(history)
    if config.out_path is not None:
        model.save(
            Path(config.out_path),
            extra_meta={"train": {"iterations": config.iterations, "seed": config.seed}},
        )
    return model
