"""Masked latent blending that splits sampling into style and color stages.

At the blend step the color latent replaces the main path inside the blend
mask; every other step passes the main path through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging.types import Mask
from .codec import Latent


@dataclass(frozen=True)
class BlendSchedule:
    """Blend at steps {tau, tau-1, ..., tau-window+1}. window=1 reproduces
    the single-step rule exactly."""

    T: int
    tau: int
    m_c: Mask
    window: int = 1

    def __post_init__(self) -> None:
        if not 0 <= self.tau < self.T:
            raise ValueError(f"tau must satisfy 0 <= tau < T, got {self.tau}, T={self.T}")
        if self.window < 1 or self.tau - self.window + 1 < 0:
            raise ValueError("blend window must fit within [0, tau]")

    @classmethod
    def from_fraction(
        cls, T: int, tau_fraction: float, m_c: Mask, window: int = 1
    ) -> "BlendSchedule":
        if not 0.0 <= tau_fraction < 1.0:
            raise ValueError("tau_fraction must lie in [0, 1)")
        return cls(T=T, tau=int(round(tau_fraction * (T - 1))), m_c=m_c, window=window)

    def active_at(self, t: int) -> bool:
        return self.tau - self.window + 1 <= t <= self.tau


def mhb_blend(z_c_t: Latent, z_m_t: Latent, m_c: Mask, t: int, tau: int) -> Latent:
    """z' = z_c*m + z_m*(1-m) at t == tau; z_m unchanged otherwise."""
    if z_c_t.data.shape != z_m_t.data.shape:
        raise ValueError("latent dims differ")
    if m_c.data.shape != z_m_t.data.shape[1:]:
        raise ValueError("blend mask dims do not match latent spatial dims")
    if t != tau:
        return z_m_t
    m = m_c.data.astype(np.float32)[None]
    return Latent(z_c_t.data * m + z_m_t.data * (1.0 - m))
