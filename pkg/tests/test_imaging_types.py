"""Image/Mask value contracts and the masking primitive."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hairlab.imaging import BilateralParams, Image, Mask, apply_mask


def test_image_accepts_2d_and_clamps_epsilon():
    img = Image(np.full((8, 8), 0.5, dtype=np.float32))
    assert img.channels == 1 and img.data.shape == (8, 8, 1)
    eps = Image(np.full((8, 8, 3), 1.0 + 5e-7, dtype=np.float64))
    assert eps.data.max() == 1.0


def test_image_rejects_bad_values():
    with pytest.raises(ValueError):
        Image(np.zeros((4, 4, 3), dtype=np.float32))  # too small
    with pytest.raises(ValueError):
        Image(np.zeros((8, 8, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        Image(np.full((8, 8, 3), 1.5, dtype=np.float32))
    with pytest.raises(ValueError):
        Image(np.full((8, 8, 3), np.inf, dtype=np.float32))


def test_image_gray_and_rgb_round_trip():
    rgb = Image(np.random.default_rng(0).random((8, 8, 3), dtype=np.float64).astype(np.float32))
    np.testing.assert_allclose(rgb.gray(), rgb.data.mean(axis=2), atol=0)
    mono = Image(np.full((8, 8, 1), 0.3, dtype=np.float32))
    up = mono.to_rgb()
    assert up.channels == 3
    np.testing.assert_array_equal(up.data[:, :, 0], mono.data[:, :, 0])
    assert rgb.to_rgb() is rgb


def test_mask_rejects_nonbinary():
    with pytest.raises(ValueError):
        Mask(np.full((8, 8), 2, dtype=np.uint8))
    with pytest.raises(ValueError):
        Mask(np.full((8, 8), 0.5, dtype=np.float32))
    with pytest.raises(ValueError):
        Mask(np.zeros((8, 8, 1), dtype=np.uint8))


@given(
    hnp.arrays(np.uint8, (12, 9), elements=st.integers(0, 1)),
    hnp.arrays(np.uint8, (12, 9), elements=st.integers(0, 1)),
)
@settings(max_examples=30, deadline=None)
def test_mask_boolean_algebra(a, b):
    ma, mb = Mask(a), Mask(b)
    np.testing.assert_array_equal((ma & mb).data, a & b)
    np.testing.assert_array_equal((ma | mb).data, a | b)
    np.testing.assert_array_equal((~ma).data, 1 - a)
    # De Morgan
    np.testing.assert_array_equal((~(ma & mb)).data, ((~ma) | (~mb)).data)
    assert ma.count() == int(a.sum())


def test_apply_mask_zeroes_outside(rng):
    img = Image(rng.random((8, 8, 3), dtype=np.float64).astype(np.float32))
    m = np.zeros((8, 8), dtype=np.uint8)
    m[2:5, 3:7] = 1
    out = apply_mask(img, Mask(m))
    np.testing.assert_array_equal(out.data[m.astype(bool)], img.data[m.astype(bool)])
    assert np.all(out.data[~m.astype(bool)] == 0.0)
    with pytest.raises(ValueError):
        apply_mask(img, Mask.zeros(9, 9))


def test_bilateral_params_validation():
    with pytest.raises(ValueError):
        BilateralParams(spatial_sigma=0.0)
    with pytest.raises(ValueError):
        BilateralParams(range_sigma=-1.0)
    with pytest.raises(ValueError):
        BilateralParams(radius=0)
