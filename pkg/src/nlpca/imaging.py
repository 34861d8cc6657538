"""Poisson noise simulation with peak scaling, and image quality metrics.

The noise severity convention: the ground truth f is linearly rescaled so
that max(f) = peak before sampling, hence y_i ~ Poisson(f_i * peak / max f).
Lower peak means fewer photons and a harder problem.  PSNR is computed on
the 8-bit scale, so estimates obtained at a given peak must be multiplied
by 255 / peak by the caller before evaluation.
"""

import math

import numpy as np

from .validation import as_intensity, check_same_shape, make_rng

__all__ = ["simulate_poisson", "psnr", "mae", "make_rng"]


def simulate_poisson(f, peak, rng):
    """Draw a photon-count image with intensity scaled to the given peak.

    Parameters
    ----------
    f : 2D or 3D array of nonnegative intensities, not all zero.
    peak : positive real; max(f) is mapped to this Poisson mean.
    rng : numpy Generator or integer seed.

    Returns
    -------
    Integer count array of the same shape.
    """
    f = as_intensity(f, "f")
    fmax = f.max()
    if fmax <= 0:
        raise ValueError("degenerate intensity: image is all zero")
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    rng = make_rng(rng)
    return rng.poisson(f * (peak / fmax)).astype(np.int64)


def psnr(fhat, f):
    """Peak signal-to-noise ratio in dB against an 8-bit scale reference.

    Returns 10*log10(255^2 / MSE); identical images give +inf rather than
    an error so benchmark tables degrade gracefully.
    """
    fhat = np.asarray(fhat, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    check_same_shape(fhat, f)
    mse = np.mean((fhat - f) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def mae(fhat, f):
    """Mean absolute error normalized by the total mass of the truth.

    Returns ||fhat - f||_1 / ||f||_1; invariant to common rescaling.
    """
    fhat = np.asarray(fhat, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    check_same_shape(fhat, f)
    denom = np.abs(f).sum()
    if denom == 0:
        raise ValueError("zero ground-truth mass")
    return float(np.abs(fhat - f).sum() / denom)
