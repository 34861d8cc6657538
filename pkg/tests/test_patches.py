import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlpca.patches import (
    PatchGeometry,
    PatchSet,
    bin_counts,
    patchize,
    reproject,
    upsample_bilinear,
)


def test_patchize_hand_oracle():
    # 3x3 image, 2x2 patches, step 1: anchors (0,0),(0,1),(1,0),(1,1)
    img = np.arange(9).reshape(3, 3)
    ps = patchize(img, (2, 2))
    expect = np.array([
        [0, 1, 3, 4],
        [1, 2, 4, 5],
        [3, 4, 6, 7],
        [4, 5, 7, 8],
    ])
    assert np.array_equal(ps.matrix, expect)
    assert ps.geometry.anchor_counts == (2, 2)


def test_patchize_step_two():
    img = np.arange(25).reshape(5, 5)
    ps = patchize(img, PatchGeometry((5, 5), (2, 2), 2))
    assert ps.geometry.anchor_counts == (2, 2)
    assert np.array_equal(ps.matrix[0], [0, 1, 5, 6])
    assert np.array_equal(ps.matrix[3], [12, 13, 17, 18])


def test_patchize_3d_band_axis_innermost():
    cube = np.arange(2 * 2 * 3).reshape(2, 2, 3)
    ps = patchize(cube, (1, 1, 2))
    # anchors iterate (i, j, b) with b fastest
    assert ps.geometry.anchor_counts == (2, 2, 2)
    assert np.array_equal(ps.matrix[0], cube[0, 0, 0:2])
    assert np.array_equal(ps.matrix[1], cube[0, 0, 1:3])
    assert np.array_equal(ps.matrix[2], cube[0, 1, 0:2])


def test_geometry_validation():
    with pytest.raises(ValueError, match="larger than image"):
        PatchGeometry((4, 4), (5, 5))
    with pytest.raises(ValueError, match="positive"):
        PatchGeometry((4, 4), (0, 2))
    with pytest.raises(ValueError, match="rank"):
        PatchGeometry((4, 4), (2, 2, 2))


def test_patchset_shape_check():
    geo = PatchGeometry((4, 4), (2, 2))
    with pytest.raises(ValueError, match="does not match"):
        PatchSet(geo, np.zeros((5, 4)))


def test_reproject_inverts_patchize_exactly(rng):
    for _ in range(10):
        h = int(rng.integers(6, 40))
        w = int(rng.integers(6, 40))
        p = int(rng.integers(1, min(h, w) + 1))
        img = rng.random((h, w))
        assert np.array_equal(reproject(patchize(img, (p, p))), img)


def test_reproject_averages_disagreeing_patches():
    # two 1x2 patches over a 1x3 image; middle pixel covered twice
    geo = PatchGeometry((1, 3), (1, 2))
    mat = np.array([[1.0, 5.0], [3.0, 2.0]])
    out = reproject(PatchSet(geo, mat))
    assert np.allclose(out, [[1.0, 4.0, 2.0]])


def test_reproject_fills_uncovered_pixels():
    # step 2 on a 5-wide axis with 2-wide patches covers columns 0..3
    geo = PatchGeometry((1, 5), (1, 2), (1, 2))
    mat = np.array([[1.0, 1.0], [7.0, 7.0]])
    out = reproject(PatchSet(geo, mat))
    assert out.shape == (1, 5)
    assert out[0, 4] == 7.0  # copied from nearest covered pixel


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 24), st.integers(4, 24), st.integers(1, 4),
       st.integers(0, 2 ** 31 - 1))
def test_reproject_identity_property(h, w, p, seed):
    img = np.random.default_rng(seed).random((h, w))
    assert np.array_equal(reproject(patchize(img, (p, p))), img)


def test_bin_counts_conserves_photons():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 50, size=(13, 17))
    binned, padded = bin_counts(y, (3, 3))
    assert binned.sum() == y.sum()
    assert binned.shape == (5, 6)
    assert padded == (15, 18)
    assert binned.dtype == y.dtype


def test_bin_counts_hand_oracle():
    y = np.arange(16).reshape(4, 4)
    binned, padded = bin_counts(y, (2, 2))
    assert padded == (4, 4)
    assert np.array_equal(binned, [[0 + 1 + 4 + 5, 2 + 3 + 6 + 7],
                                   [8 + 9 + 12 + 13, 10 + 11 + 14 + 15]])


def test_bin_counts_errors():
    with pytest.raises(ValueError):
        bin_counts(np.zeros((4, 4)), (0, 2))
    with pytest.raises(ValueError):
        bin_counts(np.zeros((4, 4)), (2, 2, 2))


def test_upsample_center_oracle():
    # 2x2 -> 3x3 endpoint-aligned: center is the mean of all corners
    img = np.array([[0.0, 2.0], [4.0, 6.0]])
    out = upsample_bilinear(img, (3, 3))
    assert out.shape == (3, 3)
    assert out[0, 0] == 0.0 and out[2, 2] == 6.0
    assert out[1, 1] == pytest.approx(3.0)
    assert out[0, 1] == pytest.approx(1.0)


def test_upsample_identity_when_same_shape():
    img = np.random.default_rng(1).random((5, 7))
    assert np.allclose(upsample_bilinear(img, (5, 7)), img)


def test_upsample_intensity_scale():
    img = np.ones((2, 2))
    out = upsample_bilinear(img, (4, 4), intensity_scale=1 / 9)
    assert np.allclose(out, 1 / 9)


def test_upsample_spatial_axes_leaves_bands():
    cube = np.random.default_rng(2).random((3, 3, 4))
    out = upsample_bilinear(cube, (6, 6, 4), spatial_axes=(0, 1))
    assert out.shape == (6, 6, 4)
    with pytest.raises(ValueError, match="not resized"):
        upsample_bilinear(cube, (6, 6, 5), spatial_axes=(0, 1))


def test_upsample_rejects_shrinking():
    with pytest.raises(ValueError, match="at least"):
        upsample_bilinear(np.ones((4, 4)), (2, 4))
