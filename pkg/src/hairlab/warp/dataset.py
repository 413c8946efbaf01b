"""Training-sample assembly for the warping net.

Each avatar yields samples whose conditioning hides the target hair: the
hair crop is geometrically augmented, the segmap has hair relabeled to
background, and the face image is masked to the style-agnostic region.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace as dc_replace
from typing import Sequence

import numpy as np

from ..imaging.types import Image, Mask, apply_mask
from ..maskops import SegMap, build_style_agnostic_mask, select_region
from .augment import AugmentationSpec, augment_hair


@dataclass(frozen=True)
class WarpConditioning:
    """Inputs the warp net may see: augmented hair, hair-free segmap, pose
    prior, and the agnostic face."""

    augmented_hair: Image
    agnostic_segmap: SegMap
    pose_prior: Image
    agnostic_face: Image

    def __post_init__(self) -> None:
        dims = (self.augmented_hair.height, self.augmented_hair.width)
        for part in (self.pose_prior, self.agnostic_face):
            if (part.height, part.width) != dims:
                raise ValueError("conditioning parts disagree on dimensions")
        if (self.agnostic_segmap.height, self.agnostic_segmap.width) != dims:
            raise ValueError("segmap dims differ from images")
        hair_id = self.agnostic_segmap.id_of("hair")
        if (self.agnostic_segmap.labels == hair_id).any():
            raise ValueError("agnostic segmap still contains hair pixels")


@dataclass(frozen=True)
class WarpSample:
    conditioning: WarpConditioning
    target: Image
    hair_mask: Mask


def strip_hair(seg: SegMap) -> SegMap:
    """Relabel hair pixels as background."""
    labels = seg.labels.copy()
    labels[labels == seg.id_of("hair")] = seg.id_of("background")
    return dc_replace(seg, labels=labels)


def make_warp_dataset(
    samples: Sequence,
    spec: AugmentationSpec,
    n_augment: int = 1,
) -> list[WarpSample]:
    """n_augment differently-seeded augmentations per avatar; avatars with
    no hair pixels are skipped with a warning."""
    if not samples:
        raise ValueError("no avatar samples given")
    out: list[WarpSample] = []
    for i, s in enumerate(samples):
        hair = select_region(s.segmap, {"hair"})
        if hair.count() == 0:
            warnings.warn(f"avatar {i} has an empty hair mask; skipped", stacklevel=2)
            continue
        hair_img = apply_mask(s.image, hair)
        agnostic = build_style_agnostic_mask(s.segmap, s.keypoints)
        face = apply_mask(s.image, agnostic)
        seg_a = strip_hair(s.segmap)
        for j in range(n_augment):
            sub = dc_replace(spec, seed=spec.seed + i * max(n_augment, 1) + j)
            aug_img, _aug_mask = augment_hair(hair_img, hair, sub)
            out.append(
                WarpSample(
                    conditioning=WarpConditioning(
                        augmented_hair=aug_img,
                        agnostic_segmap=seg_a,
                        pose_prior=s.pose_prior,
                        agnostic_face=face,
                    ),
                    target=s.image,
                    hair_mask=hair,
                )
            )
    return out
