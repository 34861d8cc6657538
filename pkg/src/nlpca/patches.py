"""Patch extraction and reconstruction, plus binning and interpolation.

An image is turned into the M x N matrix Y whose rows are the vectorized
overlapping patches (anchors in lexicographic raster order, no padding, so
anchors stop where a whole patch still fits).  After per-patch estimation,
reproject maps the rows back to an image by uniformly averaging every
estimate covering each pixel.

Binning sums counts over small pixel blocks (sums of independent Poisson
variables are Poisson, so a binned image is again a count image at a higher
effective peak); upsample_bilinear enlarges the result back, rescaling
intensities by the supplied factor.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

__all__ = [
    "PatchGeometry", "PatchSet", "patchize", "reproject",
    "bin_counts", "upsample_bilinear",
]


@dataclass(frozen=True)
class PatchGeometry:
    """Sliding-window layout: image shape, patch shape, per-axis step."""

    image_shape: tuple
    patch_shape: tuple
    step: tuple = None

    def __post_init__(self):
        image_shape = tuple(int(s) for s in self.image_shape)
        patch_shape = tuple(int(s) for s in self.patch_shape)
        step = self.step
        if step is None:
            step = (1,) * len(image_shape)
        elif np.isscalar(step):
            step = (int(step),) * len(image_shape)
        else:
            step = tuple(int(s) for s in step)
        object.__setattr__(self, "image_shape", image_shape)
        object.__setattr__(self, "patch_shape", patch_shape)
        object.__setattr__(self, "step", step)
        if len(patch_shape) != len(image_shape) or len(step) != len(image_shape):
            raise ValueError("image_shape, patch_shape, step must have equal rank")
        if any(p <= 0 for p in patch_shape) or any(s <= 0 for s in step):
            raise ValueError("patch_shape and step must be positive")
        if any(p > i for p, i in zip(patch_shape, image_shape)):
            raise ValueError(
                f"patch {patch_shape} larger than image {image_shape}")

    @property
    def anchor_counts(self):
        return tuple((i - p) // s + 1 for i, p, s
                     in zip(self.image_shape, self.patch_shape, self.step))

    @property
    def n_patches(self):
        return int(np.prod(self.anchor_counts))

    @property
    def patch_size(self):
        return int(np.prod(self.patch_shape))


@dataclass
class PatchSet:
    """Vectorized patches: row i is the patch at the i-th anchor."""

    geometry: PatchGeometry
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.geometry.n_patches, self.geometry.patch_size):
            raise ValueError(
                f"matrix shape {m.shape} does not match geometry "
                f"({self.geometry.n_patches}, {self.geometry.patch_size})")
        self.matrix = m


def patchize(image, geometry):
    """Extract all patches of the geometry into a PatchSet.

    Anchors are ordered lexicographically (row-major; for 3D cubes the
    band axis varies fastest, i.e. it is the innermost axis of the raster
    order), and each row is the patch raveled in C order.
    """
    image = np.asarray(image)
    if isinstance(geometry, (tuple, list)):
        geometry = PatchGeometry(image.shape, tuple(geometry))
    if tuple(image.shape) != geometry.image_shape:
        raise ValueError(
            f"image shape {image.shape} != geometry {geometry.image_shape}")
    win = sliding_window_view(image, geometry.patch_shape)
    sel = tuple(slice(None, None, s) for s in geometry.step)
    win = win[sel]
    mat = win.reshape(geometry.n_patches, geometry.patch_size)
    return PatchSet(geometry, np.ascontiguousarray(mat))


def reproject(patches):
    """Average overlapping patch estimates back into an image.

    Each pixel gets the arithmetic mean of every patch value covering it.
    The mean is computed as ref + mean(values - ref) with ref one of the
    covering values, which returns the exact common value when all
    estimates of a pixel agree (so reproject(patchize(x)) == x exactly).
    Pixels no patch covers (possible only with step > 1) are filled from
    the nearest covered pixel.
    """
    geo = patches.geometry
    counts = geo.anchor_counts
    pat = patches.matrix.reshape(counts + geo.patch_shape)
    ndim = len(geo.image_shape)
    ref = np.zeros(geo.image_shape)
    acc = np.zeros(geo.image_shape)
    cov = np.zeros(geo.image_shape)

    def span(offset):
        return tuple(
            slice(d, d + (c - 1) * s + 1, s)
            for d, c, s in zip(offset, counts, geo.step))

    for offset in np.ndindex(*geo.patch_shape):
        layer = pat[(Ellipsis,) + offset]
        ref[span(offset)] = layer
    for offset in np.ndindex(*geo.patch_shape):
        sl = span(offset)
        layer = pat[(Ellipsis,) + offset]
        acc[sl] += layer - ref[sl]
        cov[sl] += 1.0

    covered = cov > 0
    out = ref.copy()
    out[covered] += acc[covered] / cov[covered]
    if not covered.all():
        _, idx = ndimage.distance_transform_edt(
            ~covered, return_indices=True)
        out = out[tuple(idx)]
    return out


def bin_counts(counts, bin_shape):
    """Sum counts over non-overlapping bins, padding with zeros as needed.

    Output shape is ceil(image/bin) per axis; total photon count is
    conserved exactly.  Returns (binned, padded_shape) where padded_shape
    records the zero-padded extent so an upsampled image can be cropped
    back to the original size.
    """
    counts = np.asarray(counts)
    if np.isscalar(bin_shape):
        bin_shape = (int(bin_shape),) * counts.ndim
    bin_shape = tuple(int(b) for b in bin_shape)
    if len(bin_shape) != counts.ndim:
        raise ValueError("bin_shape rank must match image rank")
    if any(b <= 0 for b in bin_shape):
        raise ValueError("zero or negative bin dimension")
    padded_shape = tuple(-(-s // b) * b for s, b in zip(counts.shape, bin_shape))
    if padded_shape != counts.shape:
        padded = np.zeros(padded_shape, dtype=counts.dtype)
        padded[tuple(slice(0, s) for s in counts.shape)] = counts
    else:
        padded = counts
    # reshape to (n0, b0, n1, b1, ...) and sum the bin axes
    shape = []
    for s, b in zip(padded_shape, bin_shape):
        shape.extend([s // b, b])
    axes = tuple(range(1, 2 * len(bin_shape), 2))
    binned = padded.reshape(shape).sum(axis=axes)
    return binned, padded_shape


def upsample_bilinear(image, target_shape, intensity_scale=1.0, spatial_axes=None):
    """Resize by separable linear interpolation with edge clamping.

    Endpoints align: source index 0 maps to target index 0 and the last
    source index to the last target index.  Every output value is
    multiplied by intensity_scale (pass 1/prod(bin_shape) to convert
    bin sums back to per-pixel intensity).  With spatial_axes given, only
    those axes are resized; the others must match the target already
    (used to leave the spectral axis of a cube untouched).
    """
    image = np.asarray(image, dtype=np.float64)
    target_shape = tuple(int(t) for t in target_shape)
    if len(target_shape) != image.ndim:
        raise ValueError("target rank must match image rank")
    if spatial_axes is None:
        spatial_axes = tuple(range(image.ndim))
    for ax in range(image.ndim):
        if ax not in spatial_axes and image.shape[ax] != target_shape[ax]:
            raise ValueError(f"axis {ax} is not resized but shapes differ")
        if target_shape[ax] < image.shape[ax]:
            raise ValueError("target must be at least the source shape")
    coords = []
    for ax, (s, t) in enumerate(zip(image.shape, target_shape)):
        if ax in spatial_axes and t > 1:
            coords.append(np.arange(t) * ((s - 1) / (t - 1)))
        elif ax in spatial_axes:
            coords.append(np.zeros(t))
        else:
            coords.append(np.arange(t, dtype=np.float64))
    grid = np.meshgrid(*coords, indexing="ij")
    out = ndimage.map_coordinates(image, np.array(grid), order=1, mode="nearest")
    return out * intensity_scale
