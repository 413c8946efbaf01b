"""Prompt machinery: embedding determinism, inversion layout, freeze
contracts, contrastive fine-tune plumbing, stroke intake."""

from __future__ import annotations

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from hairlab.conditioning import (
    MAX_TOKENS,
    AdapterSample,
    AdapterTrainConfig,
    InversionAdapter,
    PromptEmbedding,
    StrokeMap,
    ToyDualEncoder,
    augment_pairs,
    embed_prompt,
    finetune_dual_encoder,
    intake_stroke_map,
    invert_reference,
    retrieval_top1,
    train_inversion_adapter,
)
from hairlab.conditioning.text import tokenize
from hairlab.diffusion import NoiseSchedule, ToyCodec, ToyDenoiser
from hairlab.imaging import Image, Mask

encoder = ToyDualEncoder()


def _img(rng, size: int = 32) -> Image:
    return Image(rng.random((size, size, 3)).astype(np.float32))


# --- tokenize / embed_prompt ----------------------------------------------


def test_tokenize_lowercases_and_truncates():
    assert tokenize("Red HAIR") == ["red", "hair"]
    long = " ".join(str(i) for i in range(40))
    assert len(tokenize(long)) == MAX_TOKENS


def test_embed_same_text_identical():
    a = embed_prompt(encoder, "a portrait with red hair")
    b = embed_prompt(encoder, "a portrait with red hair")
    assert a.tokens.tobytes() == b.tokens.tobytes()


def test_embed_empty_is_designated_uncond():
    un = embed_prompt(encoder, "")
    assert un.length == 1
    red = embed_prompt(encoder, "red hair")
    assert un.tokens.shape[1] == red.tokens.shape[1]
    assert not np.array_equal(un.pooled(), red.pooled())
    # Whitespace-only text is the same unconditional embedding.
    assert embed_prompt(encoder, "   ").tokens.tobytes() == un.tokens.tobytes()


def test_embed_prompts_distinguishable():
    a = embed_prompt(encoder, "red hair").pooled()
    b = embed_prompt(encoder, "blue hair").pooled()
    cos = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert cos < 0.99


def test_prompt_embedding_validation():
    with pytest.raises(ValueError, match="length, d"):
        PromptEmbedding(np.zeros(4, dtype=np.float32))
    with pytest.raises(ValueError, match="finite"):
        PromptEmbedding(np.full((2, 4), np.nan, dtype=np.float32))
    emb = PromptEmbedding(np.ones((3, 8), dtype=np.float32))
    assert emb.length == 3 and emb.dim == 8
    np.testing.assert_allclose(emb.pooled(), np.ones(8))


# --- invert_reference ------------------------------------------------------


def test_inversion_length_is_template_plus_k(rng):
    adapter = InversionAdapter(k=3)
    out = invert_reference(adapter, encoder, _img(rng), template="one two three four five")
    assert out.length == 5 + 3


def test_inversion_prefix_matches_embed_prompt(rng):
    adapter = InversionAdapter(k=4)
    template = "a photo of a person"
    out = invert_reference(adapter, encoder, _img(rng), template=template)
    prefix = embed_prompt(encoder, template).tokens
    assert out.tokens[: len(prefix)].tobytes() == prefix.tobytes()


def test_inversion_distinguishes_references(rng):
    adapter = InversionAdapter(k=4)
    a = invert_reference(adapter, encoder, _img(rng))
    b = invert_reference(adapter, encoder, _img(rng))
    assert float(np.linalg.norm(a.tokens[-4:] - b.tokens[-4:])) > 0.0


def test_zero_adapter_emits_zero_pseudo_tokens(rng):
    adapter = InversionAdapter(k=2)
    with torch.no_grad():
        for p in adapter.parameters():
            p.zero_()
    out = invert_reference(adapter, encoder, _img(rng))
    assert not out.tokens[-2:].any()


def test_inversion_dim_mismatch_rejected(rng):
    with pytest.raises(ValueError, match="dim"):
        invert_reference(InversionAdapter(dim=32, feature_len=16), encoder, _img(rng))


# --- adapter training ------------------------------------------------------


def _adapter_dataset(rng, codec, n: int = 3) -> list[AdapterSample]:
    out = []
    for _ in range(n):
        img = _img(rng, 16)
        keep = np.ones((16, 16), dtype=bool)
        keep[4:12, 4:12] = False
        masked = Image(img.data * keep[:, :, None].astype(np.float32))
        out.append(
            AdapterSample(
                masked_face=masked, keep_mask=Mask(keep), latent=codec.encode(img)
            )
        )
    return out


def test_adapter_training_freezes_backbone(rng):
    codec = ToyCodec()
    backend = ToyDenoiser(base=16, seed=0)
    adapter = InversionAdapter(seed=1)
    before_backend = [p.detach().clone() for p in backend.parameters()]
    before_encoder = encoder.text_checksum()
    before_adapter = [p.detach().clone() for p in adapter.parameters()]
    train_inversion_adapter(
        adapter,
        encoder,
        backend,
        _adapter_dataset(rng, codec),
        NoiseSchedule.linear_beta(10),
        codec,
        AdapterTrainConfig(steps=3, batch=2),
    )
    for p, ref in zip(backend.parameters(), before_backend):
        assert torch.equal(p, ref)
    assert encoder.text_checksum() == before_encoder
    assert any(
        not torch.equal(p, ref)
        for p, ref in zip(adapter.parameters(), before_adapter)
    )
    assert len(adapter.train_history) == 3
    # Training restores the backend's gradient flags for later fine-tuning.
    assert all(p.requires_grad for p in backend.parameters())


def test_adapter_training_rejects_empty(rng):
    with pytest.raises(ValueError, match="empty"):
        train_inversion_adapter(
            InversionAdapter(),
            encoder,
            ToyDenoiser(base=16),
            [],
            NoiseSchedule.linear_beta(10),
            ToyCodec(),
        )


def test_adapter_gradient_matches_finite_difference(rng):
    """Central finite difference on one adapter weight, everything float64."""
    codec = ToyCodec()
    backend = ToyDenoiser(base=16, seed=0).double()
    for p in backend.parameters():
        p.requires_grad_(False)
    adapter = InversionAdapter(seed=1).double()
    img = _img(rng, 16)
    feats = torch.from_numpy(encoder.image_features(img)).double()
    prefix = torch.from_numpy(embed_prompt(encoder, "a photo").tokens).double()
    z0 = codec.encode(img).data.astype(np.float64)
    eps = rng.standard_normal(z0.shape)
    gamma = np.concatenate(
        [0.6 * z0 + 0.8 * eps, np.zeros((1, 16, 16)), z0], axis=0
    )[None]
    gamma_t = torch.from_numpy(gamma)
    t_t = torch.tensor([7.0], dtype=torch.float64)
    eps_t = torch.from_numpy(eps)[None]

    def loss_value() -> torch.Tensor:
        pseudo = adapter(feats[None])
        full = torch.cat([prefix[None], pseudo], dim=1)
        pred = backend(gamma_t, t_t, full.mean(dim=1))
        return F.mse_loss(pred, eps_t)

    adapter.zero_grad()
    loss_value().backward()
    param = adapter.net[0].weight
    analytic = float(param.grad.reshape(-1)[0])
    h = 1e-6
    with torch.no_grad():
        flat = param.reshape(-1)
        orig = float(flat[0])
        flat[0] = orig + h
        up = float(loss_value())
        flat[0] = orig - h
        down = float(loss_value())
        flat[0] = orig
    fd = (up - down) / (2 * h)
    assert abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-12) < 1e-3


# --- contrastive fine-tune -------------------------------------------------


def test_augment_pairs_cardinality(rng):
    pairs = [(f"caption {i}", _img(rng)) for i in range(4)]
    aug = augment_pairs(pairs, rotations=[0.0, 90.0], mirror=True)
    assert len(aug) == 16
    assert len(augment_pairs(pairs, rotations=[], mirror=False)) == 4


def test_augment_mirror_is_horizontal_flip(rng):
    img = _img(rng)
    aug = augment_pairs([("x", img)], rotations=[0.0], mirror=True)
    np.testing.assert_array_equal(aug[1][1].data, img.data[:, ::-1])


def test_rotation_quarter_turns_exact(rng):
    img = _img(rng)
    aug = augment_pairs([("x", img)], rotations=[90.0, 180.0, 270.0, 360.0], mirror=False)
    np.testing.assert_array_equal(aug[3][1].data, img.data)
    np.testing.assert_array_equal(aug[1][1].data, np.rot90(img.data, 2, axes=(0, 1)))


def test_finetune_updates_text_head_only(rng):
    enc = ToyDualEncoder(seed=2)
    pairs = [(f"hair color {i}", _img(rng)) for i in range(4)]
    visual_before = enc.visual_checksum()
    text_before = enc.text_checksum()
    from hairlab.conditioning import FinetuneConfig

    finetune_dual_encoder(enc, pairs, config=FinetuneConfig(steps=5))
    assert enc.visual_checksum() == visual_before
    assert enc.text_checksum() != text_before
    assert len(enc.train_history) == 5


def test_finetune_rejects_single_pair(rng):
    with pytest.raises(ValueError, match="2 pairs"):
        finetune_dual_encoder(ToyDualEncoder(), [("only", _img(rng))])


def test_finetune_improves_retrieval(rng):
    enc = ToyDualEncoder(seed=3)
    pairs = [(f"portrait with {c} hair", _img(rng)) for c in ("red", "blue", "green", "violet")]
    from hairlab.conditioning import FinetuneConfig

    finetune_dual_encoder(enc, pairs, config=FinetuneConfig(steps=100))
    assert retrieval_top1(enc, pairs) >= 3


# --- stroke intake ----------------------------------------------------------


def test_transparent_raster_is_empty():
    raw = np.zeros((16, 16, 4), dtype=np.float32)
    sm = intake_stroke_map(raw, (16, 16))
    assert sm.painted_mask().count() == 0


def test_opaque_red_everywhere():
    raw = np.zeros((16, 16, 4), dtype=np.float32)
    raw[:, :, 0] = 1.0
    raw[:, :, 3] = 1.0
    sm = intake_stroke_map(raw, (16, 16))
    assert sm.painted_mask().count() == 16 * 16
    np.testing.assert_array_equal(sm.rgba[:, :, :3], raw[:, :, :3])


def test_half_opacity_dropped():
    raw = np.zeros((8, 8, 4), dtype=np.float32)
    raw[:4, :, 3] = 0.4
    raw[4:, :, 3] = 0.6
    sm = intake_stroke_map(raw, (8, 8))
    assert not sm.rgba[:4, :, 3].any()
    assert sm.rgba[4:, :, 3].all()


def test_painted_black_lifted_above_zero():
    raw = np.zeros((8, 8, 4), dtype=np.float32)
    raw[:, :, 3] = 1.0
    sm = intake_stroke_map(raw, (8, 8))
    assert sm.rgba[:, :, :3].max() >= 1.0 / 255.0
    assert sm.color_image().data.any()


def test_color_image_zeroes_unpainted(rng):
    raw = rng.random((8, 8, 4)).astype(np.float32)
    raw[:, :, 3] = 0.0
    raw[2:4, 2:4, 3] = 1.0
    sm = intake_stroke_map(raw, (8, 8))
    img = sm.color_image().data
    assert not img[0, 0].any()
    assert img[2:4, 2:4].any()


def test_intake_resize_policy(rng):
    raw = np.zeros((32, 32, 4), dtype=np.float32)
    raw[:, :, 3] = 1.0
    raw[:, :, 1] = 0.5
    sm = intake_stroke_map(raw, (16, 16))
    assert (sm.height, sm.width) == (16, 16)
    with pytest.raises(ValueError, match="does not match source"):
        intake_stroke_map(raw, (16, 16), allow_resize=False)


def test_strokemap_validation():
    bad_alpha = np.zeros((8, 8, 4), dtype=np.float32)
    bad_alpha[:, :, 3] = 0.5
    with pytest.raises(ValueError, match="binary"):
        StrokeMap(bad_alpha)
    bad_rgb = np.zeros((8, 8, 4), dtype=np.float32)
    bad_rgb[:, :, 0] = 1.5
    with pytest.raises(ValueError, match="RGB"):
        StrokeMap(bad_rgb)
    with pytest.raises(ValueError, match="H, W, 4"):
        StrokeMap(np.zeros((8, 8, 3), dtype=np.float32))
