"""Request, result, and model-bundle types for the edit pipeline."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..conditioning import InversionAdapter, StrokeMap, ToyDualEncoder
from ..diffusion import ToyCodec, ToyDenoiser
from ..imaging.types import Image, Mask
from ..maskops import KeypointSet, SegMap
from ..metrics import MetricReport
from ..warp import WarpModel


@dataclass(frozen=True)
class SamplingSettings:
    steps: int = 50
    guidance: float = 7.5
    tau_fraction: float = 0.8
    # Re-impose the noised color latent on every step from tau down. The
    # toy backend's prior washes a single blend out within a few steps;
    # holding the window open keeps the requested color in the hair region.
    blend_window: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("need at least 2 sampling steps")
        if self.guidance <= 0:
            raise ValueError("guidance scale must be positive")
        if not 0.0 <= self.tau_fraction < 1.0:
            raise ValueError("tau_fraction must lie in [0, 1)")
        if self.blend_window < 1:
            raise ValueError("blend window must be >= 1")


@dataclass(frozen=True)
class EditRequest:
    """One hair edit: a source portrait plus any combination of conditions."""

    source: Image
    segmap: SegMap
    keypoints: KeypointSet
    pose_prior: Image | None = None
    style_text: str | None = None
    color_text: str | None = None
    style_ref: Image | None = None
    color_ref: Image | None = None
    color_ref_hair: Mask | None = None
    stroke: StrokeMap | None = None
    reconstruction: bool = False
    sampling: SamplingSettings = SamplingSettings()

    def __post_init__(self):
        if self.source.data.shape[:2] != self.segmap.labels.shape:
            raise ValueError("source/segmap dimension mismatch")
        if self.pose_prior is not None and (
            self.pose_prior.height,
            self.pose_prior.width,
        ) != (self.source.height, self.source.width):
            raise ValueError("pose_prior/source dimension mismatch")
        if not (self.has_style_condition or self.has_color_condition or self.reconstruction):
            raise ValueError(
                "request needs a style or color condition, or reconstruction mode"
            )
        if self.color_ref is not None and self.color_ref_hair is not None:
            if self.color_ref.data.shape[:2] != (
                self.color_ref_hair.height,
                self.color_ref_hair.width,
            ):
                raise ValueError("color_ref/color_ref_hair dimension mismatch")

    @property
    def has_style_condition(self) -> bool:
        return self.style_text is not None or self.style_ref is not None

    @property
    def has_color_condition(self) -> bool:
        return (
            self.color_text is not None
            or self.color_ref is not None
            or self.stroke is not None
        )


@dataclass(frozen=True)
class Proxy:
    """Intermediate guidance image plus the hair region it proposes."""

    kind: str
    image: Image
    hair_mask: Mask

    def __post_init__(self):
        if self.kind not in ("style", "color"):
            raise ValueError(f"proxy kind must be style or color, got {self.kind!r}")
        if (self.image.height, self.image.width) != (
            self.hair_mask.height,
            self.hair_mask.width,
        ):
            raise ValueError("proxy image/mask dimension mismatch")
        if self.kind == "color":
            outside = ~self.hair_mask.astype_bool()
            if self.image.data[outside].any():
                raise ValueError("color proxy must be zero outside its hair mask")


@dataclass(frozen=True)
class EditResult:
    output: Image
    style_proxy: Proxy | None
    color_proxy: Proxy | None
    agnostic_mask: Mask
    color_mask: Mask
    restore_mask: Mask
    metrics: MetricReport | None
    provenance: dict


@dataclass
class ModelBundle:
    """Everything the pipeline samples with; weights are treated read-only."""

    backend: ToyDenoiser
    codec: ToyCodec
    encoder: ToyDualEncoder
    adapter: InversionAdapter | None = None
    warp: WarpModel | None = None

    def checksums(self) -> dict:
        out = {"backend": _module_checksum(self.backend)}
        if self.adapter is not None:
            out["adapter"] = _module_checksum(self.adapter)
        if self.warp is not None:
            out["warp"] = _module_checksum(self.warp)
        out["encoder"] = _module_checksum(self.encoder)
        return out


def _module_checksum(module) -> str:
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(tensor.detach().cpu().numpy()).tobytes())
    return h.hexdigest()[:16]


def _array_digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


def request_fingerprint(req: EditRequest) -> dict:
    """Stable content description of a request; hashed into provenance."""
    fp = {
        "source": _array_digest(req.source.data),
        "segmap": _array_digest(req.segmap.labels),
        "keypoints": _array_digest(req.keypoints.points),
        "pose_prior": _array_digest(req.pose_prior.data) if req.pose_prior else None,
        "style_text": req.style_text,
        "color_text": req.color_text,
        "style_ref": _array_digest(req.style_ref.data) if req.style_ref else None,
        "color_ref": _array_digest(req.color_ref.data) if req.color_ref else None,
        "color_ref_hair": (
            _array_digest(req.color_ref_hair.data) if req.color_ref_hair else None
        ),
        "stroke": _array_digest(req.stroke.rgba) if req.stroke else None,
        "reconstruction": req.reconstruction,
        "sampling": {
            "steps": req.sampling.steps,
            "guidance": req.sampling.guidance,
            "tau_fraction": req.sampling.tau_fraction,
            "blend_window": req.sampling.blend_window,
            "seed": req.sampling.seed,
        },
    }
    return fp


def make_provenance(req: EditRequest, models: ModelBundle, seeds: dict, timings: dict) -> dict:
    fp = request_fingerprint(req)
    payload = {"request": fp, "models": models.checksums()}
    config_hash = hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return {
        "config_hash": config_hash,
        "seeds": seeds,
        "module_versions": {"hairlab": __version__, "numpy": np.__version__},
        "timings": timings,
    }
