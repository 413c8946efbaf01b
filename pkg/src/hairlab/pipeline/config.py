"""TOML configuration and model loading for the CLI and service."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import tomli
import torch

from ..conditioning import InversionAdapter, ToyDualEncoder
from ..diffusion import ToyCodec, ToyDenoiser
from ..tensorio import load_tensors, save_tensors
from ..warp import WarpModel
from .request import ModelBundle, SamplingSettings


@dataclass(frozen=True)
class PipelineConfig:
    """Model paths plus sampling defaults; everything optional with sane
    fallbacks so a bare config still runs (untrained seeded models)."""

    backend_path: str | None = None
    warp_path: str | None = None
    adapter_path: str | None = None
    encoder_seed: int = 0
    backend_base: int = 32
    steps: int = 50
    guidance: float = 7.5
    tau_fraction: float = 0.8
    blend_window: int = 40
    workers: int = 2
    jobs_dir: str = "jobs"

    def sampling(self, seed: int = 0) -> SamplingSettings:
        return SamplingSettings(
            steps=self.steps,
            guidance=self.guidance,
            tau_fraction=self.tau_fraction,
            blend_window=self.blend_window,
            seed=seed,
        )


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Read a TOML table; unknown keys are rejected to catch typos."""
    if path is None:
        return PipelineConfig()
    raw = tomli.loads(Path(path).read_text())
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**raw)


def save_adapter(adapter: InversionAdapter, path: str | Path) -> None:
    tensors = {k: v.detach().cpu().numpy() for k, v in adapter.state_dict().items()}
    meta = {
        "arch": {
            "dim": adapter.dim,
            "k": adapter.k,
            "feature_len": adapter.feature_len,
        }
    }
    save_tensors(path, tensors, meta)


def load_adapter(path: str | Path) -> InversionAdapter:
    tensors, meta = load_tensors(path)
    arch = meta.get("arch", {})
    adapter = InversionAdapter(
        dim=int(arch.get("dim", 64)),
        k=int(arch.get("k", 4)),
        feature_len=int(arch.get("feature_len", 16)),
    )
    adapter.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in tensors.items()})
    adapter.eval()
    return adapter


def load_models(cfg: PipelineConfig) -> ModelBundle:
    """Build the model bundle; missing paths fall back to fresh seeded
    models so smoke runs work without checkpoints."""
    if cfg.backend_path and Path(cfg.backend_path).exists():
        backend = ToyDenoiser.load(cfg.backend_path)
    else:
        backend = ToyDenoiser(base=cfg.backend_base)
    warp = None
    if cfg.warp_path and Path(cfg.warp_path).exists():
        warp = WarpModel.load(cfg.warp_path)
    adapter = None
    if cfg.adapter_path and Path(cfg.adapter_path).exists():
        adapter = load_adapter(cfg.adapter_path)
    if adapter is None:
        adapter = InversionAdapter()
    return ModelBundle(
        backend=backend,
        codec=ToyCodec(),
        encoder=ToyDualEncoder(seed=cfg.encoder_seed),
        adapter=adapter,
        warp=warp,
    )
