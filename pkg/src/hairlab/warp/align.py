"""Reference-hair alignment and color-proxy finishing."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..imaging.filters import bilateral_filter
from ..imaging.patchmatch import patch_match_fill
from ..imaging.resample import resize_image, resize_mask
from ..imaging.types import BilateralParams, Image, Mask, apply_mask
from .dataset import WarpConditioning
from .model import WarpModel, conditioning_tensor

_FILL_PATCH = 7


def warp_align(
    model: WarpModel,
    color_ref: Image,
    ref_hair_mask: Mask,
    target_ctx: WarpConditioning,
) -> Image:
    """Deform the reference hair toward the target hair region.

    The reference hair (color_ref restricted to its hair mask) is injected
    into the conditioning in place of the augmented-hair planes; the rest of
    the context (agnostic segmap, pose prior, agnostic face) describes the
    target. Returns a full-frame image in [0, 1].
    """
    if ref_hair_mask.count() == 0:
        raise ValueError("reference hair mask is empty")
    if (color_ref.height, color_ref.width) != (ref_hair_mask.height, ref_hair_mask.width):
        raise ValueError("reference image/mask dimension mismatch")
    th, tw = target_ctx.pose_prior.height, target_ctx.pose_prior.width
    ref = color_ref.to_rgb()
    mask = ref_hair_mask
    if (ref.height, ref.width) != (th, tw):
        ref = resize_image(ref, th, tw)
        mask = resize_mask(mask, th, tw)
        if mask.count() == 0:
            raise ValueError("reference hair mask vanished after resizing")
    cond = replace(target_ctx, augmented_hair=apply_mask(ref, mask))
    return Image(model.infer(conditioning_tensor(cond)))


def make_color_proxy(
    warped_or_stroke: Image,
    target_hair_mask: Mask,
    bilateral: BilateralParams = BilateralParams(),
) -> Image:
    """Finish a color source into a proxy covering the whole target hair.

    Target-hair pixels the source does not cover are filled by patch
    matching against covered pixels only, the result is smoothed with an
    edge-preserving filter, and everything outside the target hair mask is
    zeroed.
    """
    src = warped_or_stroke.to_rgb()
    if (src.height, src.width) != (target_hair_mask.height, target_hair_mask.width):
        raise ValueError("source/target dimension mismatch")
    if target_hair_mask.count() == 0:
        raise ValueError("target hair mask is empty")
    covered = src.data.max(axis=2) > 0.0
    if not covered.any():
        raise ValueError("source image has no colored pixels")

    h, w = covered.shape
    interest = covered | target_hair_mask.astype_bool()
    ys, xs = np.nonzero(interest)
    pad = bilateral.radius + _FILL_PATCH
    y0, y1 = max(int(ys.min()) - pad, 0), min(int(ys.max()) + 1 + pad, h)
    x0, x1 = max(int(xs.min()) - pad, 0), min(int(xs.max()) + 1 + pad, w)
    y0, y1 = _widen(y0, y1, h)
    x0, x1 = _widen(x0, x1, w)

    window = Image(src.data[y0:y1, x0:x1])
    hole = Mask((~covered[y0:y1, x0:x1]).astype(np.uint8))
    if hole.count():
        window = patch_match_fill(window, hole, patch_size=_FILL_PATCH)
    window = bilateral_filter(window, bilateral)

    full = np.zeros_like(src.data)
    full[y0:y1, x0:x1] = window.data
    return apply_mask(Image(full), target_hair_mask)


def _widen(lo: int, hi: int, limit: int) -> tuple[int, int]:
    """Grow [lo, hi) to at least 8 pixels so the window is a legal image."""
    while hi - lo < 8:
        if lo > 0:
            lo -= 1
        elif hi < limit:
            hi += 1
        else:
            break
    return lo, hi
