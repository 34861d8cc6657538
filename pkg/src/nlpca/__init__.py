"""Non-local PCA denoising for photon-limited (Poisson) images.

The package factors groups of similar patches in the natural-parameter
domain of the Poisson likelihood, so very low photon counts are handled
without any Gaussian approximation.  See README.md for the method
outline, the CLI, and the benchmark harness.
"""

__version__ = "0.1.0"

from .anscombe import (
    anscombe_forward,
    anscombe_inverse,
    variance_stabilization_experiment,
)
from .clustering import BregmanKMeans, bregman_divergence, bregman_kmeans, sum_bands
from .factorization import (
    ExpFamilyPCA,
    FactorizationError,
    FactorPair,
    SolverConfig,
    SpiralState,
    biconvexity_witness,
    estimate,
    factorize,
    init_factors,
    poisson_loss,
    soft_threshold,
)
from .imaging import mae, psnr, simulate_poisson
from .io import ImageFormatError, read_image, write_image
from .patches import (
    PatchGeometry,
    PatchSet,
    bin_counts,
    patchize,
    reproject,
    upsample_bilinear,
)
from .phantoms import PHANTOMS, make_phantom
from .pipeline import (
    NonLocalPCADenoiser,
    PipelineConfig,
    denoise,
    denoise_binned,
    denoise_spectral,
)
from .validation import make_rng

__all__ = [
    "__version__",
    "anscombe_forward", "anscombe_inverse", "variance_stabilization_experiment",
    "BregmanKMeans", "bregman_divergence", "bregman_kmeans", "sum_bands",
    "ExpFamilyPCA", "FactorizationError", "FactorPair", "SolverConfig",
    "SpiralState", "biconvexity_witness", "estimate", "factorize",
    "init_factors", "poisson_loss", "soft_threshold",
    "mae", "psnr", "simulate_poisson",
    "ImageFormatError", "read_image", "write_image",
    "PatchGeometry", "PatchSet", "bin_counts", "patchize", "reproject",
    "upsample_bilinear",
    "PHANTOMS", "make_phantom",
    "NonLocalPCADenoiser", "PipelineConfig", "denoise", "denoise_binned",
    "denoise_spectral",
    "make_rng",
]
