"""Bregman hard clustering of patch rows.

k-means alternating assignment and mean update, where the per-point cost
is a Bregman divergence chosen to match the noise model:

    gaussian:  d(f, c) = ||f - c||^2
    poisson:   d(f, c) = sum_j c_j - f_j * log(c_j)

The Poisson display drops terms that depend only on f, so it can be
negative; what matters is that its argmin over centers agrees with the
argmin of the full Bregman divergence between natural parameters.  The
arithmetic mean remains the optimal center for both variants, so the
estimation step is the ordinary mean update.

Centers are clamped at 1e-10 inside the log because raw low-count patches
can average to exactly zero in some coordinates.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .validation import make_rng

EPS_CLAMP = 1e-10
DIVERGENCES = ("gaussian", "poisson")

__all__ = [
    "bregman_divergence", "bregman_kmeans", "sum_bands",
    "Clustering", "BregmanKMeans", "DIVERGENCES", "EPS_CLAMP",
]


def bregman_divergence(divergence, f, c):
    """Divergence from point f to center c (vectors of equal length)."""
    f = np.asarray(f, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if f.shape != c.shape:
        raise ValueError(f"length mismatch: {f.shape} vs {c.shape}")
    if divergence == "gaussian":
        return float(np.sum((f - c) ** 2))
    if divergence == "poisson":
        if np.any(f < 0):
            raise ValueError("poisson divergence requires f >= 0")
        return float(np.sum(c - f * np.log(np.maximum(c, EPS_CLAMP))))
    raise ValueError(f"divergence must be one of {DIVERGENCES}")


def _distances(divergence, points, centers):
    """M x K matrix of divergences from every point to every center."""
    if divergence == "gaussian":
        sq_p = np.einsum("ij,ij->i", points, points)
        sq_c = np.einsum("kj,kj->k", centers, centers)
        return sq_p[:, None] + sq_c[None, :] - 2.0 * points @ centers.T
    log_c = np.log(np.maximum(centers, EPS_CLAMP))
    return centers.sum(axis=1)[None, :] - points @ log_c.T


@dataclass
class Clustering:
    """Result of bregman_kmeans."""

    labels: np.ndarray
    centers: np.ndarray
    n_clusters: int
    n_iter: int
    objective: float
    # objective after each assignment and each estimation step, in order
    objective_history: list = field(default_factory=list, repr=False)


def bregman_kmeans(points, n_clusters, divergence, rng, max_iter=100,
                   init_centers=None):
    """Cluster rows of `points` into n_clusters groups.

    Initial centers are n_clusters distinct rows selected uniformly
    without replacement (or `init_centers` verbatim).  Assignment breaks
    ties toward the lowest cluster index; estimation recomputes centers
    as arithmetic means; a cluster left empty is reseeded with the point
    farthest from its own current center.  Iterates until the labels stop
    changing or max_iter is reached.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be an M x N matrix")
    m = points.shape[0]
    if n_clusters > m:
        raise ValueError(f"K={n_clusters} exceeds the number of points {m}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if divergence not in DIVERGENCES:
        raise ValueError(f"divergence must be one of {DIVERGENCES}")
    if init_centers is not None:
        centers = np.array(init_centers, dtype=np.float64)
        if centers.shape != (n_clusters, points.shape[1]):
            raise ValueError("init_centers shape must be (K, N)")
    else:
        rng = make_rng(rng)
        chosen = rng.choice(m, size=n_clusters, replace=False)
        centers = points[chosen].copy()

    labels = None
    history = []
    for it in range(1, max_iter + 1):
        dist = _distances(divergence, points, centers)
        new_labels = np.argmin(dist, axis=1)          # ties -> lowest index
        point_cost = np.take_along_axis(
            dist, new_labels[:, None], axis=1).ravel()
        for k in np.flatnonzero(np.bincount(new_labels, minlength=n_clusters) == 0):
            far = int(np.argmax(point_cost))
            centers[k] = points[far]
            new_labels[far] = k
            point_cost[far] = bregman_divergence(
                divergence, points[far], centers[k])
        history.append(float(point_cost.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for k in range(n_clusters):
            members = points[labels == k]
            if len(members):
                centers[k] = members.mean(axis=0)
        dist = _distances(divergence, points, centers)
        history.append(float(
            np.take_along_axis(dist, labels[:, None], axis=1).sum()))
    return Clustering(
        labels=labels, centers=centers, n_clusters=n_clusters,
        n_iter=it, objective=history[-1], objective_history=history)


def sum_bands(cube):
    """Collapse an (H, W, B) cube to 2D by summing the band axis.

    Spectral data is clustered through this image: spatial patches of the
    band sum are grouped, and every 3D patch inherits the label of its
    spatial anchor.
    """
    cube = np.asarray(cube)
    if cube.ndim != 3:
        raise ValueError(f"expected a 3D cube, got ndim={cube.ndim}")
    return cube.sum(axis=2)


class BregmanKMeans(ClusterMixin, BaseEstimator):
    """Estimator facade over bregman_kmeans.

    Parameters
    ----------
    n_clusters : number of clusters K.
    divergence : 'poisson' (default) or 'gaussian'.
    max_iter : iteration cap.
    random_state : integer seed for center selection.
    """

    def __init__(self, n_clusters=14, divergence="poisson", max_iter=100,
                 random_state=0):
        self.n_clusters = n_clusters
        self.divergence = divergence
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        result = bregman_kmeans(
            X, self.n_clusters, self.divergence,
            make_rng(self.random_state), max_iter=self.max_iter)
        self.labels_ = result.labels
        self.cluster_centers_ = result.centers
        self.n_iter_ = result.n_iter
        self.objective_ = result.objective
        return self

    def predict(self, X):
        X = check_array(X, dtype=np.float64)
        dist = _distances(self.divergence, X, self.cluster_centers_)
        return np.argmin(dist, axis=1)
