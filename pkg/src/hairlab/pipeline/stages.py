"""The two-proxy edit flow: style proxy, color-stage inputs, final edit.

Stage recipe:
1. Style proxy: inpaint everything outside the style-agnostic mask under the
   style condition, with a pose-keypoint control plane. Its new hair region
   is recovered by change detection against the source inside the head
   bounding box (stand-in for re-segmentation; an external parser can be
   plugged in instead).
2. Color stage: pick a color source by precedence stroke > color reference >
   source hair (style-only edits), finish it into a color proxy covering the
   color-stage mask, and derive an edge control from the style proxy (or the
   source when there is none).
3. Final pass: masked-latent sampling over the color-stage region, splicing
   the noised color-proxy latent at the blend step, then pixel compositing
   outside the edited region.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..conditioning import PromptEmbedding, embed_prompt, invert_reference
from ..diffusion import (
    BlendSchedule,
    ConditioningBundle,
    ControlSignal,
    NoiseSchedule,
    SamplerConfig,
    mhb_sample,
)
from ..imaging.edges import canny_edges
from ..imaging.resample import resize_image, resize_mask
from ..imaging.types import Image, Mask, apply_mask
from ..maskops import (
    KeypointSet,
    build_color_stage_mask,
    build_style_agnostic_mask,
    restore_region,
    select_region,
)
from ..metrics import (
    DownsampleEmbedder,
    MetricReport,
    identity_similarity,
    masked_psnr,
    masked_ssim,
)
from ..warp import WarpConditioning, make_color_proxy, strip_hair, warp_align
from .request import (
    EditRequest,
    EditResult,
    ModelBundle,
    Proxy,
    make_provenance,
)

CHANGE_THRESHOLD = 0.1
HEAD_BOX_MARGIN = 0.15
_HEAD_LABELS = (
    "hair",
    "skin",
    "ears",
    "left_brow",
    "right_brow",
    "eyes",
    "nose",
    "mouth",
)


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def render_pose_control(kp: KeypointSet, height: int, width: int, sigma: float = 1.5) -> Image:
    """Single-plane keypoint heatmap: a Gaussian blob at every landmark."""
    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    plane = np.zeros((height, width), dtype=np.float64)
    for x, y in kp.points:
        plane += np.exp(-(((ys - y) ** 2 + (xs - x) ** 2) / (2.0 * sigma**2)))
    peak = plane.max()
    if peak > 0:
        plane /= peak
    return Image(plane.astype(np.float32)[:, :, None])


def _stage_seed(master: int, stage_index: int) -> int:
    return int(np.random.SeedSequence([master, stage_index]).generate_state(1)[0])


def _head_box(req: EditRequest) -> tuple[int, int, int, int]:
    """Bounding box of head labels, padded by a margin; (y0, y1, x0, x1)."""
    present = [l for l in _HEAD_LABELS if l in req.segmap.label_set]
    region = select_region(req.segmap, tuple(present))
    ys, xs = np.nonzero(region.data)
    h, w = req.segmap.labels.shape
    if len(ys) == 0:
        return 0, h, 0, w
    my, mx = int(round(HEAD_BOX_MARGIN * h)), int(round(HEAD_BOX_MARGIN * w))
    return (
        max(int(ys.min()) - my, 0),
        min(int(ys.max()) + 1 + my, h),
        max(int(xs.min()) - mx, 0),
        min(int(xs.max()) + 1 + mx, w),
    )


def _style_embedding(req: EditRequest, models: ModelBundle) -> PromptEmbedding:
    parts = []
    if req.style_text is not None:
        parts.append(embed_prompt(models.encoder, req.style_text).tokens)
    if req.style_ref is not None:
        if models.adapter is None:
            raise ValueError("style reference supplied but no inversion adapter loaded")
        parts.append(
            invert_reference(models.adapter, models.encoder, req.style_ref).tokens
        )
    return PromptEmbedding(np.concatenate(parts, axis=0))


def _final_embedding(req: EditRequest, models: ModelBundle) -> PromptEmbedding | None:
    parts = []
    text = " ".join(t for t in (req.style_text, req.color_text) if t)
    if text:
        parts.append(embed_prompt(models.encoder, text).tokens)
    if req.style_ref is not None and models.adapter is not None:
        parts.append(
            invert_reference(models.adapter, models.encoder, req.style_ref).tokens
        )
    if not parts:
        return None
    return PromptEmbedding(np.concatenate(parts, axis=0))


def _uncond(models: ModelBundle) -> PromptEmbedding:
    return embed_prompt(models.encoder, "")


def make_style_proxy(
    req: EditRequest,
    models: ModelBundle,
    parser=None,
) -> Proxy:
    """Inpaint a new hairstyle outside the agnostic mask; recover its hair
    region by change detection (or an external `parser(image) -> SegMap`)."""
    if not req.has_style_condition:
        raise ValueError("style condition required")
    m_a = build_style_agnostic_mask(req.segmap, req.keypoints)
    inpaint = ~m_a
    pose = ControlSignal(
        "pose_keypoints",
        render_pose_control(req.keypoints, req.source.height, req.source.width),
    )
    sched = NoiseSchedule.linear_beta(req.sampling.steps)
    bundle = ConditioningBundle(
        cond=_style_embedding(req, models),
        uncond=_uncond(models),
        controls=(pose,),
        guidance_scale=req.sampling.guidance,
    )
    image = mhb_sample(
        models.backend,
        models.codec,
        req.source,
        inpaint,
        sched,
        bundle,
        config=SamplerConfig(
            seed=_stage_seed(req.sampling.seed, 0), pixel_composite=True
        ),
    )
    if parser is not None:
        hair = select_region(parser(image), ("hair",))
    else:
        changed = (
            np.abs(image.to_rgb().data - req.source.to_rgb().data).mean(axis=2)
            > CHANGE_THRESHOLD
        )
        box = np.zeros_like(changed)
        y0, y1, x0, x1 = _head_box(req)
        box[y0:y1, x0:x1] = True
        hair = Mask((changed & box & (m_a.data == 0)).astype(np.uint8))
    return Proxy(kind="style", image=image, hair_mask=hair)


def build_warp_context(req: EditRequest) -> WarpConditioning:
    """Target-side conditioning for reference-hair alignment: hair-free
    segmap, pose plane, and the agnostic face. The warp net trains on dense
    pose priors, so a supplied prior beats the keypoint-heatmap fallback."""
    m_a = build_style_agnostic_mask(req.segmap, req.keypoints)
    h, w = req.source.height, req.source.width
    placeholder = Image.zeros(h, w)
    pose = req.pose_prior
    if pose is None:
        pose = render_pose_control(req.keypoints, h, w)
    elif pose.data.shape[2] != 1:
        pose = Image(pose.data.mean(axis=2, keepdims=True).astype(np.float32))
    return WarpConditioning(
        augmented_hair=placeholder,
        agnostic_segmap=strip_hair(req.segmap),
        pose_prior=pose,
        agnostic_face=apply_mask(req.source, m_a),
    )


@dataclass(frozen=True)
class ColorStageInputs:
    proxy: Proxy | None
    color_mask: Mask
    restore_mask: Mask
    controls: tuple[ControlSignal, ...]


def make_color_stage_inputs(
    req: EditRequest,
    style_proxy: Proxy | None,
    models: ModelBundle,
) -> ColorStageInputs:
    """Pick the color source (stroke > color reference > source hair for
    style-only edits > none), finish it into a proxy over the color-stage
    mask, and build the edge control."""
    source_hair = select_region(req.segmap, ("hair",))
    proxy_hair = style_proxy.hair_mask if style_proxy is not None else source_hair
    m_c = build_color_stage_mask(source_hair, proxy_hair)
    m_n = restore_region(source_hair, proxy_hair)

    color_source: Image | None = None
    if req.stroke is not None:
        color_source = req.stroke.color_image()
    elif req.color_ref is not None:
        color_source = _reference_color_source(req, models)
    elif style_proxy is not None:
        color_source = apply_mask(req.source, source_hair)

    proxy = None
    if color_source is not None and m_c.count() > 0 and color_source.data.max() > 0:
        proxy = Proxy(kind="color", image=make_color_proxy(color_source, m_c), hair_mask=m_c)

    edge_src = style_proxy.image if style_proxy is not None else req.source
    controls = (ControlSignal("canny_edge", canny_edges(edge_src)),)
    return ColorStageInputs(proxy=proxy, color_mask=m_c, restore_mask=m_n, controls=controls)


def _reference_color_source(req: EditRequest, models: ModelBundle) -> Image:
    """Reference hair aligned to the target: through the warp model when one
    is loaded, otherwise resized and masked directly."""
    if req.color_ref_hair is None:
        raise ValueError("color reference needs its hair mask")
    if models.warp is not None:
        return warp_align(
            models.warp, req.color_ref, req.color_ref_hair, build_warp_context(req)
        )
    h, w = req.source.height, req.source.width
    ref = resize_image(req.color_ref.to_rgb(), h, w)
    mask = resize_mask(req.color_ref_hair, h, w)
    return apply_mask(ref, mask)


def edit(
    req: EditRequest,
    models: ModelBundle,
    color_stage: bool = True,
    parser=None,
) -> EditResult:
    """Run the full edit; deterministic for a fixed request and seed."""
    timings: dict[str, float] = {}
    seeds = {
        "master": req.sampling.seed,
        "style": _stage_seed(req.sampling.seed, 0),
        "final": _stage_seed(req.sampling.seed, 1),
    }

    t0 = time.perf_counter()
    try:
        m_a = build_style_agnostic_mask(req.segmap, req.keypoints)
    except Exception as exc:
        raise StageError("masks", exc) from exc

    style_proxy = None
    if req.has_style_condition:
        try:
            style_proxy = make_style_proxy(req, models, parser=parser)
        except Exception as exc:
            raise StageError("style_proxy", exc) from exc
    timings["style_proxy_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        color = make_color_stage_inputs(req, style_proxy, models)
    except Exception as exc:
        raise StageError("color_proxy", exc) from exc
    timings["color_proxy_s"] = time.perf_counter() - t0

    if not color_stage:
        if style_proxy is None:
            raise StageError("final", ValueError("nothing to output with both stages off"))
        output = style_proxy.image
        timings["final_s"] = 0.0
    else:
        t0 = time.perf_counter()
        try:
            output = _final_pass(req, models, style_proxy, color)
        except Exception as exc:
            raise StageError("final", exc) from exc
        timings["final_s"] = time.perf_counter() - t0

    metrics = _metrics_snapshot(req.source, output, color.color_mask)
    return EditResult(
        output=output,
        style_proxy=style_proxy,
        color_proxy=color.proxy,
        agnostic_mask=m_a,
        color_mask=color.color_mask,
        restore_mask=color.restore_mask,
        metrics=metrics,
        provenance=make_provenance(req, models, seeds, timings),
    )


def _final_pass(
    req: EditRequest,
    models: ModelBundle,
    style_proxy: Proxy | None,
    color: ColorStageInputs,
) -> Image:
    sched = NoiseSchedule.linear_beta(req.sampling.steps)
    cond = _final_embedding(req, models)
    uncond = _uncond(models)
    # With no condition the guided extrapolation has nothing to contrast
    # against; run the conditional branch alone.
    guidance = req.sampling.guidance if cond is not None else 1.0
    bundle = ConditioningBundle(
        cond=cond if cond is not None else uncond,
        uncond=uncond,
        controls=color.controls,
        guidance_scale=guidance,
    )
    inpaint = color.color_mask
    blend = None
    proxy_img = None
    if color.proxy is not None:
        proxy_img = color.proxy.image
        tau = int(round(req.sampling.tau_fraction * (sched.T - 1)))
        # The schedule rejects windows reaching below step 0, so a request
        # with fewer steps or a lower tau just gets the widest legal window.
        blend = BlendSchedule.from_fraction(
            sched.T,
            req.sampling.tau_fraction,
            color.color_mask,
            window=min(req.sampling.blend_window, tau + 1),
        )
    return mhb_sample(
        models.backend,
        models.codec,
        req.source,
        inpaint,
        sched,
        bundle,
        color_proxy=proxy_img,
        blend=blend,
        config=SamplerConfig(
            seed=_stage_seed(req.sampling.seed, 1), pixel_composite=True
        ),
    )


def _metrics_snapshot(source: Image, output: Image, color_mask: Mask) -> MetricReport | None:
    """Drift vs the source outside the edited region."""
    region = ~color_mask
    if region.count() == 0:
        return None
    embedder = DownsampleEmbedder()
    return MetricReport(
        psnr_nonhair=masked_psnr(source, output, region),
        ssim_nonhair=masked_ssim(source, output, region),
        ids=identity_similarity(embedder, source, output),
        notes=("region = complement of the color-stage mask; toy embedder",),
    )
