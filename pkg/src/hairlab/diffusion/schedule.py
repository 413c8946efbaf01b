"""Forward-noise schedule and the closed-form noising step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import Latent

SAMPLER_KINDS = ("ancestral", "deterministic")


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative signal levels alpha_bar[t] for t in [0, T). alpha_bar must
    start near 1 and never increase; the sampler consumes steps T-1 .. 0."""

    alpha_bars: np.ndarray
    kind: str = "ancestral"

    def __post_init__(self) -> None:
        ab = np.asarray(self.alpha_bars, dtype=np.float64)
        if ab.ndim != 1 or ab.size < 1:
            raise ValueError("alpha_bars must be a non-empty 1-D array")
        if ab[0] < 1.0 - 1e-3 or ab[0] > 1.0:
            raise ValueError(f"alpha_bar[0] must be within 1e-3 of 1, got {ab[0]}")
        if np.any(ab <= 0.0) or np.any(ab > 1.0):
            raise ValueError("alpha_bars must lie in (0, 1]")
        if np.any(np.diff(ab) > 0.0):
            raise ValueError("alpha_bars must be non-increasing")
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"sampler kind must be one of {SAMPLER_KINDS}")
        object.__setattr__(self, "alpha_bars", ab)

    @property
    def T(self) -> int:
        return self.alpha_bars.size

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t < self.T:
            raise ValueError(f"step {t} out of range [0, {self.T})")
        return float(self.alpha_bars[t])

    def alpha(self, t: int) -> float:
        """Per-step signal ratio alpha_t = alpha_bar[t] / alpha_bar[t-1]."""
        if t == 0:
            return self.alpha_bar(0)
        return self.alpha_bar(t) / self.alpha_bar(t - 1)

    @classmethod
    def linear_beta(
        cls,
        steps: int = 50,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
        kind: str = "ancestral",
    ) -> "NoiseSchedule":
        if steps < 1:
            raise ValueError("steps must be positive")
        betas = np.linspace(beta_start, beta_end, steps, dtype=np.float64)
        return cls(np.cumprod(1.0 - betas), kind=kind)

    @classmethod
    def from_alpha_bars(cls, alpha_bars, kind: str = "ancestral") -> "NoiseSchedule":
        return cls(np.asarray(alpha_bars, dtype=np.float64), kind=kind)


def add_noise(z0: Latent, t: int, eps: Latent, sched: NoiseSchedule) -> Latent:
    """z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps."""
    if eps.data.shape != z0.data.shape:
        raise ValueError("noise dims must match the latent")
    ab = sched.alpha_bar(t)
    scale_signal = np.float32(np.sqrt(ab))
    scale_noise = np.float32(np.sqrt(1.0 - ab))
    return Latent(scale_signal * z0.data + scale_noise * eps.data)
