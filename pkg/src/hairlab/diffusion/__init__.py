"""Latent-diffusion machinery: codec, schedule, inpainting input assembly,
masked latent blending, control hooks, a small trainable denoiser, and the
two-stage sampler."""

from .codec import Latent, LatentCodec, ToyCodec
from .schedule import NoiseSchedule, add_noise
from .inputs import InpaintInput, assemble_inpaint_input
from .blend import BlendSchedule, mhb_blend
from .controls import ControlBank, ControlSignal, apply_controls
from .backend import ConditioningBundle, DenoiserBackend, ToyDenoiser
from .train import TrainConfig, train_toy_backend
from .sampler import SamplerConfig, mhb_sample

__all__ = [
    "Latent",
    "LatentCodec",
    "ToyCodec",
    "NoiseSchedule",
    "add_noise",
    "InpaintInput",
    "assemble_inpaint_input",
    "BlendSchedule",
    "mhb_blend",
    "ControlBank",
    "ControlSignal",
    "apply_controls",
    "ConditioningBundle",
    "DenoiserBackend",
    "ToyDenoiser",
    "TrainConfig",
    "train_toy_backend",
    "SamplerConfig",
    "mhb_sample",
]
