from .types import Image, Mask, BilateralParams, AvatarSample, apply_mask
from .color import rgb_to_hsv, hsv_to_rgb, mean_hue_deg, hue_distance_deg
from .filters import bilateral_filter, gaussian_blur
from .edges import canny_edges
from .patchmatch import patch_match_fill
from .resample import downsample_mask, resize_image, resize_mask
from .avatar import GeneratorSpec, AvatarParams, generate_avatar, avatar_caption
from .io import (
    read_image_png,
    read_rgba_png,
    write_rgba_png,
    write_image_png,
    read_mask_png,
    write_mask_png,
    read_segmap,
    write_segmap,
    read_keypoints_json,
    write_keypoints_json,
)

__all__ = [
    "Image",
    "Mask",
    "BilateralParams",
    "AvatarSample",
    "apply_mask",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "mean_hue_deg",
    "hue_distance_deg",
    "bilateral_filter",
    "gaussian_blur",
    "canny_edges",
    "patch_match_fill",
    "downsample_mask",
    "resize_image",
    "resize_mask",
    "GeneratorSpec",
    "AvatarParams",
    "generate_avatar",
    "avatar_caption",
    "read_image_png",
    "read_rgba_png",
    "write_rgba_png",
    "write_image_png",
    "read_mask_png",
    "write_mask_png",
    "read_segmap",
    "write_segmap",
    "read_keypoints_json",
    "write_keypoints_json",
]
