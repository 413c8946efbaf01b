"""Hair warping: augmentation, conditioning assembly, flow+refine model,
adversarial training, alignment inference, and color-proxy finishing."""

from .augment import AugmentationSpec, augment_hair
from .dataset import WarpConditioning, WarpSample, make_warp_dataset, strip_hair
from .model import WarpModel, conditioning_tensor
from .train import WarpTrainConfig, masked_l1, train_warping
from .align import make_color_proxy, warp_align

__all__ = [
    "AugmentationSpec",
    "augment_hair",
    "WarpConditioning",
    "WarpSample",
    "make_warp_dataset",
    "strip_hair",
    "WarpModel",
    "conditioning_tensor",
    "WarpTrainConfig",
    "masked_l1",
    "train_warping",
    "make_color_proxy",
    "warp_align",
]
