"""Edit orchestration: request/result types, the two proxy stages, the
final blended sampling pass, configuration, job persistence, CLI, and the
HTTP service."""

from .config import PipelineConfig, load_config, load_models
from .jobs import JobStore
from .request import (
    EditRequest,
    EditResult,
    ModelBundle,
    Proxy,
    SamplingSettings,
    request_fingerprint,
)
from .stages import (
    StageError,
    build_warp_context,
    edit,
    make_color_stage_inputs,
    make_style_proxy,
    render_pose_control,
)

__all__ = [
    "EditRequest",
    "EditResult",
    "ModelBundle",
    "Proxy",
    "SamplingSettings",
    "request_fingerprint",
    "PipelineConfig",
    "load_config",
    "load_models",
    "JobStore",
    "StageError",
    "edit",
    "make_style_proxy",
    "make_color_stage_inputs",
    "render_pose_control",
    "build_warp_context",
]
