"""Anscombe variance stabilization and its closed-form inverses.

A(y) = 2*sqrt(y + 3/8) maps Poisson counts to approximately unit-variance,
approximately Gaussian values when the mean is moderate (around 3 or more).
At very low means the approximation breaks down: the transformed standard
deviation falls well below 1, which is the regime where working directly
with the Poisson likelihood pays off.  variance_stabilization_experiment
measures that empirically.

Two closed-form inverses are provided: the algebraic inverse
(x/2)^2 - 3/8 (exact left inverse of the forward map) and the asymptotically
unbiased inverse (x/2)^2 - 1/8.  The refined exact-unbiased inverse needs
external tables and is intentionally not included; results with the
closed forms are a lower bound on what a refined inverse would give.
"""

import numpy as np

from .validation import make_rng

INVERSE_KINDS = ("algebraic", "unbiased")

__all__ = [
    "anscombe_forward", "anscombe_inverse",
    "variance_stabilization_experiment", "INVERSE_KINDS",
]


def anscombe_forward(y):
    """Elementwise 2*sqrt(y + 3/8); requires y >= 0."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("counts must be nonnegative")
    return 2.0 * np.sqrt(y + 0.375)


def anscombe_inverse(x, kind="unbiased"):
    """Map stabilized values back to intensities, clamped below at 0.

    kind 'algebraic': (x/2)^2 - 3/8, the exact inverse of the forward map.
    kind 'unbiased':  (x/2)^2 - 1/8, asymptotically unbiased for the
    Poisson mean.

    Squaring a rounded square root is off by an ulp or two, so the
    algebraic branch additionally snaps to the nearest integer whenever
    the forward transform of that integer reproduces x bit for bit; this
    makes inverse(forward(k)) == k exact for every integer count k.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind == "algebraic":
        out = (x / 2.0) ** 2 - 0.375
        n = np.rint(out)
        n = np.maximum(n, 0.0)
        out = np.where(2.0 * np.sqrt(n + 0.375) == x, n, out)
    elif kind == "unbiased":
        out = (x / 2.0) ** 2 - 0.125
    else:
        raise ValueError(f"kind must be one of {INVERSE_KINDS}, got {kind!r}")
    return np.maximum(out, 0.0)


def variance_stabilization_experiment(f_values, draws, rng):
    """Empirical std of A(y), y ~ Poisson(f), for each f in f_values.

    Returns a list of (f, empirical_std) pairs, one per f, each computed
    from `draws` independent realizations (ddof=0 sample std).
    """
    draws = int(draws)
    if draws < 10 ** 4:
        raise ValueError("draws must be at least 10^4")
    rng = make_rng(rng)
    table = []
    for f in f_values:
        if f < 0:
            raise ValueError(f"Poisson mean must be nonnegative, got {f}")
        samples = rng.poisson(float(f), size=draws)
        table.append((float(f), float(np.std(anscombe_forward(samples)))))
    return table


def write_experiment_csv(table, fh):
    """Emit the experiment table as CSV with header 'f,std'."""
    fh.write("f,std\n")
    for f, std in table:
        fh.write(f"{f:.6g},{std:.6f}\n")
