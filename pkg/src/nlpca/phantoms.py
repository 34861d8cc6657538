"""Synthetic ground-truth images for benchmarks and tests.

All generators return float64 intensities on a 0..255 scale.  They are
deterministic (no randomness); noise is added separately by
imaging.simulate_poisson.
"""

import numpy as np

__all__ = ["ridges", "flag", "swoosh", "PHANTOMS", "make_phantom"]


def ridges(size=128, period=32, low=25.0, high=255.0):
    """Diagonal piecewise-constant stripes.

    A thresholded diagonal sinusoid of the given period: pixels where
    sin(2 pi (i + j) / period) >= 0 take the high value, the rest the
    low value.  Piecewise constant with two levels, so it is exactly
    low-rank in the patch domain.
    """
    i, j = np.indices((size, size))
    phase = np.sin(2.0 * np.pi * (i + j) / period)
    return np.where(phase >= 0, float(high), float(low))


def flag(size=128):
    """Horizontal stripes with a diamond and a dark square overlaid.

    Sixteen-pixel stripes alternating 200 and 60, a bright diamond
    (value 255) centered in the upper-left quadrant, and a dark square
    (value 25) in the lower-right quadrant.
    """
    i, j = np.indices((size, size))
    out = np.where((i // 16) % 2 == 0, 200.0, 60.0)
    ci = cj = size // 4
    r = size // 8
    out[np.abs(i - ci) + np.abs(j - cj) <= r] = 255.0
    s0 = 5 * size // 8
    s1 = 7 * size // 8
    out[s0:s1, s0:s1] = 25.0
    return out


def swoosh(size=128):
    """Smooth parabolic curve with a Gaussian cross-profile.

    A bright band following j = size - 1 - i^2 / size, with intensity
    falling off as a Gaussian of the distance to the curve; values span
    30..255.
    """
    i, j = np.indices((size, size)).astype(np.float64)
    curve = size - 1.0 - i * i / size
    dist = np.abs(j - curve)
    sigma = size / 10.0
    return 30.0 + 225.0 * np.exp(-0.5 * (dist / sigma) ** 2)


PHANTOMS = {"ridges": ridges, "flag": flag, "swoosh": swoosh}


def make_phantom(name, size=128):
    """Look up a phantom by name; raises ValueError for unknown names."""
    try:
        gen = PHANTOMS[name]
    except KeyError:
        raise ValueError(
            f"unknown phantom {name!r}, expected one of {sorted(PHANTOMS)}"
        ) from None
    return gen(size)
