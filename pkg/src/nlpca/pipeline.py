"""End-to-end photon-limited denoisers.

The pipeline runs five serial phases: patchize the count image, cluster
the patch rows with a Bregman divergence, factorize each cluster with the
configured exponential-family solver, fuse the per-cluster patch
estimates back by original patch index, and reproject by uniform
averaging.  Three methods share this skeleton:

  nlpca    Poisson likelihood, Newton updates on both factors.
  nlspca   Poisson likelihood, l1-penalized proximal updates on the
           coefficients (sparse variant).
  anscombe Variance-stabilizing baseline: Anscombe-transform the
           patches, factorize under squared loss, invert the transform
           on the per-patch estimates before fusion.

Variants: denoise_binned aggregates counts into small bins before
denoising and interpolates the result back (the low-intensity regime),
denoise_spectral handles 3D cubes by clustering the band-summed 2D image
and letting every 3D patch inherit its spatial anchor's label.

Everything is deterministic given (input, config, seed): the seed feeds
a SeedSequence whose first child drives clustering initialization and
whose k+1-th child initializes the factorization of cluster k, so
results do not depend on thread scheduling.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .anscombe import anscombe_forward, anscombe_inverse
from .clustering import bregman_kmeans, sum_bands
from .factorization import FactorizationError, SolverConfig, estimate, factorize
from .imaging import mae, psnr
from .patches import PatchGeometry, PatchSet, bin_counts, patchize, reproject, \
    upsample_bilinear
from .validation import as_counts, make_rng

METHODS = ("nlpca", "nlspca", "anscombe")

DEFAULTS_2D = {"patch_shape": (20, 20), "n_clusters": 14, "rank": 4}
DEFAULTS_3D = {"patch_shape": (5, 5, 23), "n_clusters": 30, "rank": 2}

__all__ = ["PipelineConfig", "denoise", "denoise_binned", "denoise_spectral",
           "NonLocalPCADenoiser", "METHODS"]


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for the full pipeline.

    patch_shape, n_clusters and rank default to None, which resolves by
    input dimensionality: 20x20 patches, 14 clusters, rank 4 for 2D
    images; 5x5x23 patches, 30 clusters, rank 2 for spectral cubes.
    Solver settings (n_iter, stop_tol, cond, l1_weight, guard) are
    passed through to the factorization.  bin_shape activates
    denoise_binned; interpolate chooses bilinear upsampling (True) or
    block replication (False).  threads caps concurrent per-cluster
    factorizations; the result is independent of the thread count.
    """

    method: str = "nlpca"
    patch_shape: tuple = None
    n_clusters: int = None
    rank: int = None
    step: int = 1
    n_iter: int = 20
    stop_tol: float = 1e-1
    cond: float = 1e-3
    l1_weight: float = None
    guard: bool = False
    inner_max: int = 20
    inner_tol: float = 1e-3
    bin_shape: tuple = None
    interpolate: bool = True
    anscombe_inverse: str = "unbiased"
    cluster_max_iter: int = 100
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolved(self, ndim):
        """Fill dimension-dependent defaults for a 2D or 3D input."""
        if ndim not in (2, 3):
            raise ValueError("input must be a 2D image or a 3D cube")
        defaults = DEFAULTS_2D if ndim == 2 else DEFAULTS_3D
        fields = {}
        for name in ("patch_shape", "n_clusters", "rank"):
            if getattr(self, name) is None:
                fields[name] = defaults[name]
        patch = fields.get("patch_shape", self.patch_shape)
        if np.isscalar(patch):
            fields["patch_shape"] = (int(patch),) * ndim
        else:
            fields["patch_shape"] = tuple(int(p) for p in patch)
        if len(fields["patch_shape"]) != ndim:
            raise ValueError(
                f"patch_shape {fields['patch_shape']} does not match a "
                f"{ndim}D input")
        return replace(self, **fields)

    def solver(self):
        """The per-cluster factorization settings this config implies."""
        mode = {"nlpca": "nlpca", "nlspca": "nlspca", "anscombe": "gaussian"}
        return SolverConfig(
            rank=self.rank, n_iter=self.n_iter, stop_tol=self.stop_tol,
            cond=self.cond, l1_weight=self.l1_weight,
            mode=mode[self.method], guard=self.guard,
            inner_max=self.inner_max, inner_tol=self.inner_tol)


def _cluster_points(method, matrix):
    """Clustering feature rows and divergence for a method."""
    if method == "anscombe":
        return anscombe_forward(matrix), "gaussian"
    return matrix.astype(np.float64), "poisson"


def _factor_input(method, matrix):
    return anscombe_forward(matrix) if method == "anscombe" else \
        matrix.astype(np.float64)


def _patch_estimate(method, pair, inverse_kind):
    if method == "anscombe":
        return anscombe_inverse(pair.U @ pair.V, kind=inverse_kind)
    return estimate(pair.U, pair.V)


def _run_clusters(config, matrix, labels, seeds):
    """Factorize every cluster; returns (fused patch matrix, records).

    Clusters are independent given their seeds, so they may run on a
    thread pool without affecting the result.
    """
    fused = np.empty(matrix.shape, dtype=np.float64)
    records = [None] * config.n_clusters
    solver = config.solver()
    Yfac = _factor_input(config.method, matrix)

    def run(k):
        rows = np.flatnonzero(labels == k)
        try:
            pair, diag = factorize(Yfac[rows], solver, make_rng(seeds[k]))
        except FactorizationError as exc:
            raise FactorizationError(
                f"cluster {k}: {exc}", index=k) from exc
        fused[rows] = _patch_estimate(config.method, pair, config.anscombe_inverse)
        last = diag["iterations"][-1]
        records[k] = {
            "index": k,
            "size": int(rows.size),
            "n_iter": diag["n_iter"],
            "converged": diag["converged"],
            "loss": last["loss"],
            "penalized_loss": last["penalized_loss"],
            "l1_weight": diag["l1_weight"],
            "clamps": diag["clamp_total"],
        }
        if "spiral_max_delta" in last:
            # worst accepted proximal-step change; <= 0 certifies that no
            # accepted step ever increased a penalized row objective
            records[k]["spiral_max_delta"] = max(
                it["spiral_max_delta"] for it in diag["iterations"])
            records[k]["spiral_stalls"] = sum(
                it["spiral_stalls"] for it in diag["iterations"])

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(run, range(config.n_clusters)))
    else:
        for k in range(config.n_clusters):
            run(k)
    return fused, records


def _metrics(fhat, truth, peak):
    scale = 255.0 / peak if peak else 1.0
    scaled = fhat * scale
    return {"psnr_db": psnr(scaled, truth), "mae": mae(scaled, truth)}


def _report(config, shape, seed, clustering, records, timings, n_patches):
    return {
        "method": config.method,
        "image_shape": [int(s) for s in shape],
        "patch_shape": [int(p) for p in config.patch_shape],
        "step": config.step if np.isscalar(config.step)
        else [int(s) for s in config.step],
        "rank": int(config.rank),
        "n_clusters": int(config.n_clusters),
        "n_iter": int(config.n_iter),
        "stop_tol": float(config.stop_tol),
        "cond": float(config.cond),
        "l1_weight": config.l1_weight,
        "anscombe_inverse": config.anscombe_inverse,
        "seed": seed,
        "n_patches": int(n_patches),
        "clustering": {"n_iter": clustering.n_iter,
                       "objective": clustering.objective},
        "clusters": records,
        "timings_s": timings,
    }


def denoise(y, config=None, seed=None, truth=None, peak=None):
    """Denoise a count image; returns (intensity estimate, run report).

    3D inputs are routed to denoise_spectral.  truth (same shape, on a
    0..255 scale) adds PSNR and MAE to the report; peak rescales the
    estimate by 255/peak first, matching the convention under which the
    counts were simulated.
    """
    y = as_counts(y)
    config = config or PipelineConfig()
    if seed is None:
        seed = config.seed
    if y.ndim == 3:
        return denoise_spectral(y, config, seed, truth=truth, peak=peak)
    config = config.resolved(y.ndim)
    t0 = time.perf_counter()

    geometry = PatchGeometry(y.shape, config.patch_shape, config.step)
    patches = patchize(y, geometry)
    t1 = time.perf_counter()

    seeds = np.random.SeedSequence(seed).spawn(1 + config.n_clusters)
    points, divergence = _cluster_points(config.method, patches.matrix)
    clustering = bregman_kmeans(
        points, config.n_clusters, divergence, make_rng(seeds[0]),
        max_iter=config.cluster_max_iter)
    t2 = time.perf_counter()

    fused, records = _run_clusters(
        config, patches.matrix, clustering.labels, seeds[1:])
    t3 = time.perf_counter()

    fhat = reproject(PatchSet(geometry, fused))
    t4 = time.perf_counter()

    timings = {"patchize": t1 - t0, "clustering": t2 - t1,
               "factorization": t3 - t2, "reproject": t4 - t3,
               "total": t4 - t0}
    report = _report(config, y.shape, seed, clustering, records, timings,
                     geometry.n_patches)
    if truth is not None:
        report["metrics"] = _metrics(fhat, np.asarray(truth, float), peak)
    return fhat, report


def denoise_binned(y, config=None, seed=None, truth=None, peak=None):
    """Bin counts, denoise the binned image, upsample back.

    Counts are summed over non-overlapping config.bin_shape bins (exact
    photon conservation), the small image is denoised as usual, and the
    estimate is enlarged to the input shape, divided by the bin area so
    it is again a per-pixel intensity.  Output shape equals input shape.
    """
    y = as_counts(y)
    config = config or PipelineConfig()
    if config.bin_shape is None:
        raise ValueError("config.bin_shape must be set for denoise_binned")
    if seed is None:
        seed = config.seed
    bin_shape = config.bin_shape
    if np.isscalar(bin_shape):
        bin_shape = (int(bin_shape),) * y.ndim
    binned, padded_shape = bin_counts(y, bin_shape)
    small_cfg = replace(config, bin_shape=None)
    est, report = denoise(binned, small_cfg, seed)
    scale = 1.0 / float(np.prod(bin_shape))
    if config.interpolate:
        up = upsample_bilinear(est, padded_shape, intensity_scale=scale)
    else:
        up = est * scale
        for ax, b in enumerate(bin_shape):
            up = np.repeat(up, b, axis=ax)
    fhat = up[tuple(slice(0, s) for s in y.shape)]
    report["binning"] = {
        "bin_shape": [int(b) for b in bin_shape],
        "binned_shape": [int(s) for s in binned.shape],
        "interpolate": bool(config.interpolate),
    }
    if truth is not None:
        report["metrics"] = _metrics(fhat, np.asarray(truth, float), peak)
    return fhat, report


def denoise_spectral(y, config=None, seed=None, truth=None, peak=None):
    """Denoise a 3D cube (two spatial axes, one spectral axis).

    Clustering runs on the 2D image of per-pixel band sums, using the
    spatial footprint of the 3D patches; every 3D patch inherits the
    label of its spatial anchor.  Factorization then sees the vectorized
    3D patches.  A single-band cube reduces exactly to the 2D pipeline.
    """
    y = as_counts(y)
    if y.ndim != 3:
        raise ValueError("denoise_spectral expects a 3D cube")
    config = (config or PipelineConfig()).resolved(3)
    if seed is None:
        seed = config.seed
    if config.patch_shape[2] > y.shape[2]:
        raise ValueError(
            f"patch spectral depth {config.patch_shape[2]} exceeds the "
            f"band count {y.shape[2]}")
    t0 = time.perf_counter()

    step = config.step
    if np.isscalar(step):
        step = (int(step),) * 3
    geometry = PatchGeometry(y.shape, config.patch_shape, step)
    patches = patchize(y, geometry)
    flat = sum_bands(y)
    geo2d = PatchGeometry(flat.shape, config.patch_shape[:2], step[:2])
    spatial = patchize(flat, geo2d)
    t1 = time.perf_counter()

    seeds = np.random.SeedSequence(seed).spawn(1 + config.n_clusters)
    points, divergence = _cluster_points(config.method, spatial.matrix)
    clustering = bregman_kmeans(
        points, config.n_clusters, divergence, make_rng(seeds[0]),
        max_iter=config.cluster_max_iter)
    # anchors are raveled with the band axis innermost, so each spatial
    # anchor's labels occupy one contiguous run
    labels = np.repeat(clustering.labels, geometry.anchor_counts[2])
    t2 = time.perf_counter()

    fused, records = _run_clusters(config, patches.matrix, labels, seeds[1:])
    t3 = time.perf_counter()

    fhat = reproject(PatchSet(geometry, fused))
    t4 = time.perf_counter()

    timings = {"patchize": t1 - t0, "clustering": t2 - t1,
               "factorization": t3 - t2, "reproject": t4 - t3,
               "total": t4 - t0}
    report = _report(config, y.shape, seed, clustering, records, timings,
                     geometry.n_patches)
    report["spectral"] = {"bands": int(y.shape[2]),
                          "band_anchors": int(geometry.anchor_counts[2])}
    if truth is not None:
        report["metrics"] = _metrics(fhat, np.asarray(truth, float), peak)
    return fhat, report


class NonLocalPCADenoiser(TransformerMixin, BaseEstimator):
    """Estimator facade over the denoising pipeline.

    The denoiser is stateless across images (each input is clustered and
    factorized on its own), so fit only validates the configuration;
    transform(X) denoises one image and returns the intensity estimate.
    The run report of the last transform is kept in report_.
    """

    def __init__(self, method="nlpca", patch_shape=None, n_clusters=None,
                 rank=None, step=1, n_iter=20, stop_tol=1e-1, cond=1e-3,
                 l1_weight=None, guard=False, bin_shape=None,
                 interpolate=True, anscombe_inverse="unbiased", threads=1,
                 random_state=0):
        self.method = method
        self.patch_shape = patch_shape
        self.n_clusters = n_clusters
        self.rank = rank
        self.step = step
        self.n_iter = n_iter
        self.stop_tol = stop_tol
        self.cond = cond
        self.l1_weight = l1_weight
        self.guard = guard
        self.bin_shape = bin_shape
        self.interpolate = interpolate
        self.anscombe_inverse = anscombe_inverse
        self.threads = threads
        self.random_state = random_state

    def _config(self):
        return PipelineConfig(
            method=self.method, patch_shape=self.patch_shape,
            n_clusters=self.n_clusters, rank=self.rank, step=self.step,
            n_iter=self.n_iter, stop_tol=self.stop_tol, cond=self.cond,
            l1_weight=self.l1_weight, guard=self.guard,
            bin_shape=self.bin_shape, interpolate=self.interpolate,
            anscombe_inverse=self.anscombe_inverse, threads=self.threads,
            seed=self.random_state)

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X):
        if not hasattr(self, "config_"):
            self.fit()
        config = self.config_
        if config.bin_shape is not None:
            fhat, self.report_ = denoise_binned(X, config)
        else:
            fhat, self.report_ = denoise(X, config)
        return fhat

    def fit_transform(self, X, y=None):
        return self.fit().transform(X)
