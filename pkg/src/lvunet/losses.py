"""Segmentation losses on logits and mask-overlap metrics.

Losses take raw logits z and binary targets y in [0, 1]:

    bce(z, y)  = mean over elements of max(z, 0) - z*y + log(1 + exp(-|z|))
                 (the standard overflow-safe rewrite of -log sigmoid terms)
    dice(z, y) = 1 - (2 * sum(p*y) + s) / (sum(p^2) + sum(y^2) + s)
                 with p = sigmoid(z) and smoothing s = 1
    mixed      = 0.5 * bce + dice

Metrics take binary masks (anything nonzero counts as foreground) and
define empty-vs-empty as perfect agreement:

    iou  = |A & B| / |A | B|          dice = 2|A & B| / (|A| + |B|)
"""

import numpy as np

SMOOTH = 1.0


def _pair(a: np.ndarray, b: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float32).astype(np.float64)
    b = np.asarray(b, dtype=np.float32).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"{what} shapes differ: {a.shape} vs {b.shape}")
    return a, b


def bce_loss(logits: np.ndarray, targets: np.ndarray) -> float:
    z, y = _pair(logits, targets, "logits/targets")
    per_elem = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(per_elem.mean())


def dice_loss(logits: np.ndarray, targets: np.ndarray) -> float:
    z, y = _pair(logits, targets, "logits/targets")
    # stable sigmoid, split by sign to avoid overflow in exp
    p = np.empty_like(z)
    pos = z >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    p[~pos] = ez / (1.0 + ez)
    overlap = 2.0 * np.sum(p * y) + SMOOTH
    mass = np.sum(p * p) + np.sum(y * y) + SMOOTH
    return float(1.0 - overlap / mass)


def mixed_loss(logits: np.ndarray, targets: np.ndarray) -> float:
    return 0.5 * bce_loss(logits, targets) + dice_loss(logits, targets)


def _mask_pair(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    return pred != 0, truth != 0


def iou(pred: np.ndarray, truth: np.ndarray) -> float:
    p, t = _mask_pair(pred, truth)
    union = np.logical_or(p, t).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, t).sum() / union)


def dice_score(pred: np.ndarray, truth: np.ndarray) -> float:
    p, t = _mask_pair(pred, truth)
    sizes = int(p.sum()) + int(t.sum())
    if sizes == 0:
        return 1.0
    return float(2.0 * np.logical_and(p, t).sum() / sizes)
