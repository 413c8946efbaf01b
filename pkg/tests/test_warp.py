"""Warping module: augmentation geometry, dataset assembly, training
smoke, alignment contracts, color-proxy finishing."""

from __future__ import annotations

import csv
import dataclasses

import numpy as np
import pytest
import torch

from hairlab.imaging import BilateralParams, Image, Mask, apply_mask
from hairlab.imaging.avatar import generate_avatar
from hairlab.imaging.color import hue_distance_deg, mean_hue_deg
from hairlab.maskops import select_region
from hairlab.warp import (
    AugmentationSpec,
    WarpConditioning,
    WarpModel,
    WarpSample,
    WarpTrainConfig,
    augment_hair,
    conditioning_tensor,
    make_color_proxy,
    make_warp_dataset,
    masked_l1,
    strip_hair,
    train_warping,
    warp_align,
)


def _hair(scene):
    return select_region(scene.segmap, {"hair"})


def _hair_img(scene):
    return apply_mask(scene.image, _hair(scene))


# --- augmentation -----------------------------------------------------------


def test_identity_spec_returns_inputs(scene):
    img, mask = _hair_img(scene), _hair(scene)
    out_img, out_mask = augment_hair(img, mask, AugmentationSpec())
    assert out_img is img
    assert out_mask is mask


def test_flip_is_involution(scene):
    img, mask = _hair_img(scene), _hair(scene)
    spec = AugmentationSpec(flip=True)
    once_img, once_mask = augment_hair(img, mask, spec)
    twice_img, twice_mask = augment_hair(once_img, once_mask, spec)
    assert twice_img.data.tobytes() == img.data.tobytes()
    assert np.array_equal(twice_mask.astype_bool(), mask.astype_bool())


def test_rotation_preserves_mask_area(scene):
    mask = _hair(scene)
    spec = AugmentationSpec(rotation=15.0, seed=11)
    angle, _, _ = spec.draw()
    assert angle != 0.0
    _, out_mask = augment_hair(_hair_img(scene), mask, spec)
    assert abs(out_mask.count() - mask.count()) <= 0.05 * mask.count()


def test_mirror_equivariance(scene):
    """Flipping the output equals augmenting the flipped input with the
    mirror-conjugate spec."""
    img, mask = _hair_img(scene), _hair(scene)
    spec = AugmentationSpec(
        rotation=9.0, trig_amplitude=1.2, scale=(0.94, 1.06), seed=4
    )
    out_img, out_mask = augment_hair(img, mask, spec)
    flipped_in = Image(img.data[:, ::-1].copy())
    flipped_mask = Mask(np.ascontiguousarray(mask.data[:, ::-1]))
    mir_img, mir_mask = augment_hair(flipped_in, flipped_mask, spec.mirrored())
    np.testing.assert_allclose(mir_img.data, out_img.data[:, ::-1], atol=1e-6)
    assert np.array_equal(mir_mask.astype_bool(), out_mask.astype_bool()[:, ::-1])


def test_augment_dims_must_match(scene):
    with pytest.raises(ValueError, match="dims differ"):
        augment_hair(_hair_img(scene), Mask(np.zeros((8, 8), dtype=bool)), AugmentationSpec())


def test_spec_validation():
    with pytest.raises(ValueError, match="rotation"):
        AugmentationSpec(rotation=-1.0)
    with pytest.raises(ValueError, match="scale"):
        AugmentationSpec(scale=(0.0, 1.0))
    with pytest.raises(ValueError, match="scale"):
        AugmentationSpec(scale=(1.2, 0.8))
    with pytest.raises(ValueError, match="orientation"):
        AugmentationSpec(orientation=2)


def test_draw_deterministic():
    spec = AugmentationSpec(rotation=10.0, scale=(0.9, 1.1), seed=5)
    assert spec.draw() == spec.draw()


# --- dataset assembly -------------------------------------------------------


def test_single_avatar_single_sample(scene):
    ds = make_warp_dataset([scene], AugmentationSpec(rotation=8.0, seed=0))
    assert len(ds) == 1
    sample = ds[0]
    # The target keeps the original hair exactly.
    got = apply_mask(sample.target, sample.hair_mask)
    want = _hair_img(scene)
    assert got.data.tobytes() == want.data.tobytes()


def test_dataset_cardinality_and_agnostic_segmaps():
    scenes = [generate_avatar(s) for s in range(6)]
    ds = make_warp_dataset(scenes, AugmentationSpec(rotation=8.0, seed=0), n_augment=2)
    assert len(ds) == 12
    for sample in ds:
        seg = sample.conditioning.agnostic_segmap
        assert not (seg.labels == seg.id_of("hair")).any()


def test_hairless_avatar_skipped_with_warning(scene):
    bald = dataclasses.replace(scene, segmap=strip_hair(scene.segmap))
    with pytest.warns(UserWarning, match="empty hair mask"):
        ds = make_warp_dataset([bald], AugmentationSpec())
    assert ds == []


def test_empty_input_rejected():
    with pytest.raises(ValueError, match="no avatar"):
        make_warp_dataset([], AugmentationSpec())


def test_conditioning_rejects_hairy_segmap(scene):
    with pytest.raises(ValueError, match="hair"):
        WarpConditioning(
            augmented_hair=_hair_img(scene),
            agnostic_segmap=scene.segmap,
            pose_prior=scene.pose_prior,
            agnostic_face=scene.image,
        )


def test_conditioning_tensor_layout(scene):
    ds = make_warp_dataset([scene], AugmentationSpec())
    cond = conditioning_tensor(ds[0].conditioning)
    assert cond.shape == (8, scene.image.height, scene.image.width)
    assert cond.dtype == np.float32
    np.testing.assert_array_equal(
        cond[:3], ds[0].conditioning.augmented_hair.to_rgb().data.transpose(2, 0, 1)
    )
    assert np.isfinite(cond).all()


# --- training ---------------------------------------------------------------


def _tiny_dataset():
    scenes = [generate_avatar(s) for s in (0, 1)]
    return make_warp_dataset(scenes, AugmentationSpec(rotation=6.0, seed=0))


def test_zero_iterations_returns_initialization():
    ds = _tiny_dataset()
    cfg = WarpTrainConfig(iterations=0, base=16, scales=2, seed=3)
    trained = train_warping(ds, cfg)
    fresh = WarpModel(base=16, scales=2, seed=3)
    for (ka, va), (kb, vb) in zip(
        sorted(trained.state_dict().items()), sorted(fresh.state_dict().items())
    ):
        assert ka == kb
        assert torch.equal(va, vb)
    cond = conditioning_tensor(ds[0].conditioning)
    assert np.array_equal(trained.infer(cond), fresh.infer(cond))


def test_training_smoke_history_csv_checkpoint(tmp_path):
    ds = _tiny_dataset()
    cfg = WarpTrainConfig(
        iterations=3,
        batch=2,
        base=16,
        scales=2,
        seed=0,
        out_path=str(tmp_path / "warp.ckpt"),
        loss_csv=str(tmp_path / "loss.csv"),
    )
    model = train_warping(ds, cfg)
    assert model.iterations == 3
    assert len(model.train_history) == 3
    with open(tmp_path / "loss.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "gen_loss", "disc_loss"]
    assert len(rows) == 4
    loaded = WarpModel.load(tmp_path / "warp.ckpt")
    assert loaded.iterations == 3
    cond = conditioning_tensor(ds[0].conditioning)
    assert np.array_equal(loaded.infer(cond), model.infer(cond))


def test_training_rejects_empty_dataset():
    with pytest.raises(ValueError, match="empty"):
        train_warping([], WarpTrainConfig(iterations=1))


def test_train_config_validation():
    with pytest.raises(ValueError, match="batch"):
        WarpTrainConfig(batch=0)
    with pytest.raises(ValueError, match="rates"):
        WarpTrainConfig(gen_lr=0.0)


def test_masked_l1_oracle(rng):
    pred = rng.random((8, 8, 3)).astype(np.float32)
    target = rng.random((8, 8, 3)).astype(np.float32)
    sel = np.zeros((8, 8), dtype=bool)
    sel[2:5, 3:7] = True
    want = np.abs(pred.astype(np.float64) - target.astype(np.float64))[sel].mean()
    assert masked_l1(pred, target, Mask(sel)) == pytest.approx(want, abs=1e-12)
    with pytest.raises(ValueError, match="shape"):
        masked_l1(pred, target[:4], Mask(sel))
    with pytest.raises(ValueError, match="no pixels"):
        masked_l1(pred, target, Mask(np.zeros((8, 8), dtype=bool)))


# --- alignment --------------------------------------------------------------


def _target_ctx(scene) -> WarpConditioning:
    ds = make_warp_dataset([scene], AugmentationSpec())
    return ds[0].conditioning


def test_untrained_align_range_contract(scene):
    model = WarpModel(base=16, scales=2)
    out = warp_align(model, _hair_img(scene), _hair(scene), _target_ctx(scene))
    assert (out.height, out.width) == (scene.image.height, scene.image.width)
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_align_empty_reference_rejected(scene):
    model = WarpModel(base=16, scales=2)
    empty = Mask(np.zeros((scene.image.height, scene.image.width), dtype=bool))
    with pytest.raises(ValueError, match="empty"):
        warp_align(model, scene.image, empty, _target_ctx(scene))


def test_align_dim_mismatch_rejected(scene):
    model = WarpModel(base=16, scales=2)
    small = Mask(np.ones((8, 8), dtype=bool))
    with pytest.raises(ValueError, match="mismatch"):
        warp_align(model, scene.image, small, _target_ctx(scene))


def test_align_resizes_reference(scene):
    model = WarpModel(base=16, scales=2)
    other = generate_avatar(9)
    ref = Image(np.ascontiguousarray(other.image.data[::2, ::2]))
    ref_mask = Mask(np.ascontiguousarray(_hair(other).data[::2, ::2]))
    assert ref_mask.count() > 0
    out = warp_align(model, ref, ref_mask, _target_ctx(scene))
    assert (out.height, out.width) == (scene.image.height, scene.image.width)


# --- color proxy ------------------------------------------------------------


def _rect_mask(h: int, w: int, box) -> Mask:
    m = np.zeros((h, w), dtype=bool)
    y0, y1, x0, x1 = box
    m[y0:y1, x0:x1] = True
    return Mask(m)


def test_proxy_constant_stroke_exact():
    mask = _rect_mask(32, 32, (8, 24, 8, 24))
    src = np.zeros((32, 32, 3), dtype=np.float32)
    src[mask.astype_bool()] = (0.8, 0.2, 0.1)
    out = make_color_proxy(Image(src), mask)
    inside = out.data[mask.astype_bool()]
    assert np.abs(inside - np.array((0.8, 0.2, 0.1), dtype=np.float32)).max() < 1e-5
    assert not out.data[~mask.astype_bool()].any()


def test_proxy_zero_outside_mask_exact(rng):
    mask = _rect_mask(32, 32, (4, 28, 6, 26))
    src = np.zeros((32, 32, 3), dtype=np.float32)
    sel = mask.astype_bool() & (rng.random((32, 32)) < 0.7)
    src[sel] = rng.random((int(sel.sum()), 3)).astype(np.float32) * 0.8 + 0.1
    out = make_color_proxy(Image(src), mask)
    assert not out.data[~mask.astype_bool()].any()


def test_proxy_fills_uncovered_interior(rng):
    mask = _rect_mask(48, 48, (8, 40, 8, 40))
    src = np.zeros((48, 48, 3), dtype=np.float32)
    covered = mask.astype_bool() & (rng.random((48, 48)) < 0.7)
    src[covered] = (0.2, 0.5, 0.8)
    out = make_color_proxy(Image(src), mask)
    inside = out.data[mask.astype_bool()]
    assert (inside.max(axis=1) > 0.0).all()


def test_proxy_two_tone_sides_keep_hue():
    mask = _rect_mask(32, 48, (6, 26, 4, 44))
    src = np.zeros((32, 48, 3), dtype=np.float32)
    sel = mask.astype_bool()
    left = sel & (np.arange(48)[None, :] < 24)
    right = sel & ~left
    src[left] = (0.8, 0.1, 0.1)
    src[right] = (0.1, 0.1, 0.8)
    out = make_color_proxy(Image(src), mask)
    left_hue = mean_hue_deg(out.data[left])
    right_hue = mean_hue_deg(out.data[right])
    ref_left = mean_hue_deg(np.array([[0.8, 0.1, 0.1]]))
    ref_right = mean_hue_deg(np.array([[0.1, 0.1, 0.8]]))
    assert hue_distance_deg(left_hue, ref_left) <= 5.0
    assert hue_distance_deg(right_hue, ref_right) <= 5.0


def test_proxy_error_contracts(rng):
    img = Image(rng.random((16, 16, 3)).astype(np.float32))
    with pytest.raises(ValueError, match="empty"):
        make_color_proxy(img, Mask(np.zeros((16, 16), dtype=bool)))
    with pytest.raises(ValueError, match="mismatch"):
        make_color_proxy(img, Mask(np.ones((8, 8), dtype=bool)))
    black = Image(np.zeros((16, 16, 3), dtype=np.float32))
    with pytest.raises(ValueError, match="no colored"):
        make_color_proxy(black, Mask(np.ones((16, 16), dtype=bool)))


def test_proxy_respects_bilateral_params():
    mask = _rect_mask(32, 32, (8, 24, 8, 24))
    src = np.zeros((32, 32, 3), dtype=np.float32)
    src[mask.astype_bool()] = (0.3, 0.6, 0.9)
    out = make_color_proxy(Image(src), mask, BilateralParams(spatial_sigma=2.0, range_sigma=0.2, radius=4))
    inside = out.data[mask.astype_bool()]
    assert np.abs(inside - np.array((0.3, 0.6, 0.9), dtype=np.float32)).max() < 1e-4
