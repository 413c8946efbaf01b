"""Prompt-side machinery: dual text/image encoder, reference inversion into
pseudo-tokens, contrastive fine-tuning, and stroke-map intake."""

from .text import (
    MAX_TOKENS,
    DualEncoder,
    PromptEmbedding,
    ToyDualEncoder,
    embed_prompt,
)
from .inversion import (
    AdapterSample,
    AdapterTrainConfig,
    InversionAdapter,
    invert_reference,
    train_inversion_adapter,
)
from .finetune import FinetuneConfig, augment_pairs, finetune_dual_encoder, retrieval_top1
from .strokes import StrokeMap, intake_stroke_map

__all__ = [
    "MAX_TOKENS",
    "DualEncoder",
    "PromptEmbedding",
    "ToyDualEncoder",
    "embed_prompt",
    "AdapterSample",
    "AdapterTrainConfig",
    "InversionAdapter",
    "invert_reference",
    "train_inversion_adapter",
    "FinetuneConfig",
    "augment_pairs",
    "finetune_dual_encoder",
    "retrieval_top1",
    "StrokeMap",
    "intake_stroke_map",
]
