"""Shared argument checking and RNG construction.

All randomness in the library flows through numpy Generator objects built
by make_rng, so every operation is reproducible from a single integer seed.
"""

import numpy as np


def make_rng(seed):
    """Return a seeded numpy Generator with a fixed, documented algorithm.

    The bit generator is PCG64.  numpy draws Poisson variates with the
    inversion (multiplication) method for means below 10 and the PTRS
    transformed-rejection method above, so identical seeds give identical
    streams for any mean.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def as_intensity(f, name="image"):
    """Validate and return a float64 intensity array (finite, >= 0)."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2D or 3D, got ndim={f.ndim}")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(f < 0):
        raise ValueError(f"{name} contains negative values")
    return f


def as_counts(y, name="counts"):
    """Validate and return a count array (integer valued, >= 0)."""
    y = np.asarray(y)
    if y.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2D or 3D, got ndim={y.ndim}")
    if np.issubdtype(y.dtype, np.floating):
        if not np.all(np.isfinite(y)):
            raise ValueError(f"{name} contains non-finite values")
        if np.any(y != np.floor(y)):
            raise ValueError(f"{name} contains non-integer values")
    y = y.astype(np.int64, copy=False)
    if np.any(y < 0):
        raise ValueError(f"{name} contains negative counts")
    return y


def check_same_shape(a, b, name_a="fhat", name_b="f"):
    if a.shape != b.shape:
        raise ValueError(
            f"shape mismatch: {name_a} has {a.shape}, {name_b} has {b.shape}"
        )


def check_conformal(U, V, Y):
    """Check U (M,l), V (l,N), Y (M,N) dimensions agree."""
    U, V, Y = np.asarray(U), np.asarray(V), np.asarray(Y)
    if U.ndim != 2 or V.ndim != 2 or Y.ndim != 2:
        raise ValueError("U, V, Y must all be 2D arrays")
    if U.shape[1] != V.shape[0]:
        raise ValueError(f"inner dims differ: U is {U.shape}, V is {V.shape}")
    if (U.shape[0], V.shape[1]) != Y.shape:
        raise ValueError(
            f"Y shape {Y.shape} does not match U@V shape "
            f"({U.shape[0]}, {V.shape[1]})"
        )
    return U, V, Y
