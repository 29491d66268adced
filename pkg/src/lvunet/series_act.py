"""Series-informed activation.

A learned widening of ReLU: the response at (h, w, c) is a weighted sum of
ReLU(x + b_c) over the (2n+1)^2 spatial offsets around the position,

    y[h, w, c] = sum_{i,j in [-n, n]} a[c, i, j] * relu(x[h+i, w+j, c] + b[c])

Out-of-range positions contribute zero: the bias shift and ReLU are applied
first, then the result is zero padded by n, so padding never leaks relu(b).
Equivalently this is a per-channel (depthwise) convolution of relu(x + b)
with the kernel a, which is what makes the op fusible into a depthwise conv
at deployment time.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor_ops import _as_f32, _require_nchw


@dataclass(frozen=True)
class SeriesActivationParams:
    """Per-channel kernel a of shape (channels, 2n+1, 2n+1) and bias b."""

    n: int
    weights: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        w = _as_f32(self.weights)
        b = _as_f32(self.bias)
        k = 2 * self.n + 1
        if w.ndim != 3 or w.shape[1:] != (k, k):
            raise ValueError(f"weights shape {w.shape} does not match (channels, {k}, {k})")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match ({w.shape[0]},)")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def channels(self) -> int:
        return self.weights.shape[0]


def series_act(x: np.ndarray, p: SeriesActivationParams) -> np.ndarray:
    x = _require_nchw(x)
    if x.shape[1] != p.channels:
        raise ValueError(f"input has {x.shape[1]} channels but activation has {p.channels}")
    n, c, h, w = x.shape
    r = p.n
    u = np.maximum(x.astype(np.float64) + p.bias.astype(np.float64)[None, :, None, None], 0.0)
    if r == 0:
        out = p.weights.astype(np.float64)[None, :, 0, 0, None, None] * u
        return out.astype(np.float32)
    pad = np.zeros((n, c, h + 2 * r, w + 2 * r), dtype=np.float64)
    pad[:, :, r : r + h, r : r + w] = u
    a = p.weights.astype(np.float64)
    acc = np.zeros((n, c, h, w), dtype=np.float64)
    for i in range(2 * r + 1):
        for j in range(2 * r + 1):
            acc += a[None, :, i, j, None, None] * pad[:, :, i : i + h, j : j + w]
    return acc.astype(np.float32)
