"""Tests for the built-in test images."""

import numpy as np
import pytest

from nlpca.phantoms import PHANTOMS, flag, make_phantom, ridges, swoosh


def test_registry_names():
    assert set(PHANTOMS) == {"ridges", "flag", "swoosh"}


@pytest.mark.parametrize("name", sorted(PHANTOMS))
def test_shapes_and_range(name):
    img = make_phantom(name, 64)
    assert img.shape == (64, 64)
    assert img.dtype == np.float64
    assert img.min() >= 25.0
    assert img.max() <= 255.0


def test_default_size():
    assert make_phantom("ridges").shape == (128, 128)


def test_ridges_two_levels():
    img = ridges(128)
    assert set(np.unique(img)) == {25.0, 255.0}
    # stripes run diagonally: constant along anti-diagonals
    i, j = 10, 20
    assert img[i, j] == img[i + 5, j - 5]


def test_ridges_period():
    img = ridges(128, period=32)
    # one full period along a row repeats the pattern, up to the odd
    # boundary pixel where the sine crosses zero
    assert np.mean(img[0, :96] == img[0, 32:]) > 0.95


def test_flag_structure():
    img = flag(128)
    levels = set(np.unique(img))
    assert levels == {25.0, 60.0, 200.0, 255.0}
    # diamond center sits at the first-quarter point
    assert img[32, 32] == 255.0
    # dark square occupies the lower-right block
    assert img[96, 96] == 25.0
    # background stripes alternate every 16 rows
    assert img[0, 0] == 200.0
    assert img[16, 0] == 60.0


def test_swoosh_smooth_and_bounded():
    img = swoosh(128)
    assert img.min() >= 30.0
    assert img.max() <= 255.0
    # smooth: no two horizontally adjacent pixels jump by more than
    # the Gaussian profile allows at this width
    assert np.abs(np.diff(img, axis=1)).max() < 60.0
    # the bright curve actually reaches near-peak brightness
    assert img.max() > 200.0


def test_determinism():
    for name in PHANTOMS:
        a = make_phantom(name, 32)
        b = make_phantom(name, 32)
        assert np.array_equal(a, b)


def test_unknown_name():
    with pytest.raises(ValueError, match="unknown phantom"):
        make_phantom("nope")
