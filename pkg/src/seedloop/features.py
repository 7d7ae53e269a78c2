"""Per-superpixel descriptors: a 15-dim handcrafted bank over color and gradients.

Stands in for CNN features; an external-tensor loader lets callers plug in
their own descriptors as long as row i matches region i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch
from .superpixel import SuperpixelMap
from .tensorio import RasterImage, load_tensor

N_ORIENT_BINS = 8


@dataclass(frozen=True)
class FeatureMatrix:
    """(n_regions, dims) descriptors, z-scored per dimension."""

    n_regions: int
    dims: int
    values: np.ndarray


def standardize(values: np.ndarray) -> np.ndarray:
    """Z-score each column; columns with zero variance become all-zero."""
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    out = values - mean
    nonconst = std > 0
    out[:, nonconst] /= std[nonconst]
    out[:, ~nonconst] = 0.0
    return out


def _gradients(image: RasterImage):
    """Central-difference gradients of (R+G+B)/3 grayscale, one-sided at borders."""
    gray = image.data.astype(np.float64).sum(axis=2) / 3.0
    gy = np.empty_like(gray)
    gx = np.empty_like(gray)
    gy[1:-1, :] = (gray[2:, :] - gray[:-2, :]) / 2.0
    gy[0, :] = gray[1, :] - gray[0, :] if gray.shape[0] > 1 else 0.0
    gy[-1, :] = gray[-1, :] - gray[-2, :] if gray.shape[0] > 1 else 0.0
    gx[:, 1:-1] = (gray[:, 2:] - gray[:, :-2]) / 2.0
    gx[:, 0] = gray[:, 1] - gray[:, 0] if gray.shape[1] > 1 else 0.0
    gx[:, -1] = gray[:, -1] - gray[:, -2] if gray.shape[1] > 1 else 0.0
    return gx, gy


def superpixel_features(image: RasterImage, spmap: SuperpixelMap) -> FeatureMatrix:
    """Mean/std per RGB channel (6), mean gradient magnitude (1), and an
    8-bin gradient-orientation histogram (8), z-scored across regions."""
    if (spmap.height, spmap.width) != (image.height, image.width):
        raise DimensionMismatch("image and superpixel map dimensions differ")
    n = spmap.n_regions
    flat = spmap.region_of.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    pix = image.data.reshape(-1, 3).astype(np.float64)

    raw = np.zeros((n, 15))
    for c in range(3):
        s1 = np.bincount(flat, weights=pix[:, c], minlength=n)
        s2 = np.bincount(flat, weights=pix[:, c] ** 2, minlength=n)
        mean = s1 / counts
        var = np.maximum(s2 / counts - mean**2, 0.0)
        raw[:, c] = mean
        raw[:, 3 + c] = np.sqrt(var)

    gx, gy = _gradients(image)
    mag = np.hypot(gx, gy).ravel()
    raw[:, 6] = np.bincount(flat, weights=mag, minlength=n) / counts

    theta = np.arctan2(gy, gx).ravel()  # [-pi, pi]
    bins = np.clip(
        ((theta + np.pi) / (2 * np.pi) * N_ORIENT_BINS).astype(np.int64),
        0,
        N_ORIENT_BINS - 1,
    )
    for b in range(N_ORIENT_BINS):
        raw[:, 7 + b] = np.bincount(flat, weights=(bins == b).astype(np.float64), minlength=n)
    raw[:, 7:] /= counts[:, None]

    return FeatureMatrix(n, 15, standardize(raw))


def load_external_features(path, n_regions: int) -> FeatureMatrix:
    """Load a DFNT f32 [N, D] tensor and standardize it."""
    arr = load_tensor(path)
    if arr.dtype != np.float32 or arr.ndim != 2:
        raise ShapeMismatch("external features must be an f32 [N, D] tensor")
    if arr.shape[0] != n_regions:
        raise ShapeMismatch(
            f"feature rows {arr.shape[0]} != n_regions {n_regions}"
        )
    return FeatureMatrix(n_regions, arr.shape[1], standardize(arr.astype(np.float64)))
