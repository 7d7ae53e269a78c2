"""Segmentation metrics: pixel accuracy, mean IoU, frequency-weighted IoU."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptyConfusion, UnlabeledPrediction
from .tensorio import IGNORE, LabelMap


def confusion(pred: LabelMap, gt: LabelMap, n_categories: int) -> np.ndarray:
    """(C, C) counts, rows = ground truth, cols = prediction; gt ignore
    pixels are skipped."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionMismatch("prediction and ground truth dimensions differ")
    g = gt.labels.ravel()
    p = pred.labels.ravel()
    valid = g != IGNORE
    if (p[valid] == IGNORE).any():
        raise UnlabeledPrediction("prediction has ignore labels on scored pixels")
    if (g[valid] >= n_categories).any() or (p[valid] >= n_categories).any():
        raise DimensionMismatch("label id outside 0..C-1")
    idx = g[valid].astype(np.int64) * n_categories + p[valid].astype(np.int64)
    counts = np.bincount(idx, minlength=n_categories * n_categories)
    return counts.reshape(n_categories, n_categories)


def scores(cm: np.ndarray):
    """Return (accu, mIoU, fIoU). Classes absent from both gt and prediction
    are excluded from the mIoU mean and carry zero weight in fIoU."""
    total = cm.sum()
    if total == 0:
        raise EmptyConfusion("confusion matrix has no counts")
    diag = np.diag(cm).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)
    col = cm.sum(axis=0).astype(np.float64)
    union = row + col - diag
    present = union > 0
    iou = np.zeros(cm.shape[0])
    iou[present] = diag[present] / union[present]
    accu = float(diag.sum() / total)
    miou = float(iou[present].mean())
    fiou = float(((row / total) * iou).sum())
    return accu, miou, fiou
