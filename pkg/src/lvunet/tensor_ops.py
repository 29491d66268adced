"""Dense NCHW tensor primitives for CPU inference.

All tensors are numpy arrays of shape (n, c, h, w) holding 32-bit floats.
Every op converts its inputs to float32 on entry, accumulates internally
in float64, and casts the result back to float32. That one rule is applied
uniformly so that algebraically equal computations (e.g. a conv/BN pair vs.
the folded conv) differ only by the final float32 rounding of each op's
output, never by accumulation order artifacts.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _as_f32(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float32))


def _require_nchw(x: np.ndarray, name: str = "input") -> np.ndarray:
    x = _as_f32(x)
    if x.ndim != 4:
        raise ValueError(f"{name} must be 4-d (n, c, h, w), got {x.ndim}-d")
    return x


@dataclass(frozen=True)
class ConvSpec:
    """Geometry plus weights of one 2-d convolution.

    weight has shape (out_channels, in_channels // groups, kernel, kernel);
    bias is a vector of length out_channels or None. Square kernels and
    symmetric zero padding only.
    """

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    groups: int = 1
    weight: np.ndarray = field(default=None, repr=False)
    bias: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError("kernel/stride must be >= 1 and padding >= 0")
        if self.groups < 1:
            raise ValueError("groups must be >= 1")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ValueError(
                f"groups={self.groups} must divide in_channels={self.in_channels} "
                f"and out_channels={self.out_channels}"
            )
        if self.weight is None:
            raise ValueError("ConvSpec requires a weight array")
        w = _as_f32(self.weight)
        expect = (self.out_channels, self.in_channels // self.groups, self.kernel, self.kernel)
        if w.shape != expect:
            raise ValueError(f"weight shape {w.shape} does not match {expect}")
        object.__setattr__(self, "weight", w)
        if self.bias is not None:
            b = _as_f32(self.bias)
            if b.shape != (self.out_channels,):
                raise ValueError(f"bias shape {b.shape} does not match ({self.out_channels},)")
            object.__setattr__(self, "bias", b)


@dataclass(frozen=True)
class BatchNormParams:
    """Frozen inference-time batch norm statistics for one channel axis."""

    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        for name in ("gamma", "beta", "mean", "variance"):
            v = _as_f32(getattr(self, name))
            if v.ndim != 1:
                raise ValueError(f"{name} must be a 1-d vector, got {v.ndim}-d")
            object.__setattr__(self, name, v)
        n = self.gamma.shape[0]
        for name in ("beta", "mean", "variance"):
            if getattr(self, name).shape[0] != n:
                raise ValueError("batch norm vectors must share one channel count")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if np.any(self.variance < 0.0):
            raise ValueError("variance must be nonnegative")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


def conv_output_hw(h: int, w: int, spec: ConvSpec) -> tuple[int, int]:
    """Spatial shape produced by conv2d for an (h, w) input."""
    ho = (h + 2 * spec.padding - spec.kernel) // spec.stride + 1
    wo = (w + 2 * spec.padding - spec.kernel) // spec.stride + 1
    return ho, wo


def conv2d(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Direct 2-d convolution (cross-correlation, no kernel flip).

    Reference path with a pinned accumulation order: for every output
    element the products are summed input-channel-major, then kernel row,
    then kernel column, with the bias added last. The loop below runs in
    exactly that order and is vectorized only across output positions,
    which does not change the per-element order.
    """
    x = _require_nchw(x)
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ValueError(f"input has {c} channels but conv expects {spec.in_channels}")
    if h + 2 * spec.padding < spec.kernel or w + 2 * spec.padding < spec.kernel:
        raise ValueError(
            f"spatial dims ({h}, {w}) with padding {spec.padding} are smaller "
            f"than the {spec.kernel}x{spec.kernel} kernel"
        )
    ho, wo = conv_output_hw(h, w, spec)
    p, k, s = spec.padding, spec.kernel, spec.stride

    padded = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=np.float64)
    padded[:, :, p : p + h, p : p + w] = x

    weight = spec.weight.astype(np.float64)
    cin_g = spec.in_channels // spec.groups
    cout_g = spec.out_channels // spec.groups
    acc = np.zeros((n, spec.out_channels, ho, wo), dtype=np.float64)
    for g in range(spec.groups):
        out_sl = slice(g * cout_g, (g + 1) * cout_g)
        for ci in range(cin_g):
            plane = padded[:, g * cin_g + ci]
            for kh in range(k):
                for kw in range(k):
                    patch = plane[:, kh : kh + s * ho : s, kw : kw + s * wo : s]
                    taps = weight[out_sl, ci, kh, kw]
                    acc[:, out_sl] += taps[None, :, None, None] * patch[:, None]
    if spec.bias is not None:
        acc += spec.bias.astype(np.float64)[None, :, None, None]
    return acc.astype(np.float32)


def im2col(x: np.ndarray, kernel: int, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Unfold sliding patches into a (c*k*k, n*ho*wo) float32 matrix.

    Row index enumerates the patch entries channel-major, then kernel row,
    then kernel column, matching weight.reshape(out, c*k*k). Column j holds
    the patch for output position j taken row-major per image, images in
    batch order.
    """
    x = _require_nchw(x)
    n, c, h, w = x.shape
    k, s, p = kernel, stride, padding
    if k < 1 or s < 1 or p < 0:
        raise ValueError("kernel/stride must be >= 1 and padding >= 0")
    if h + 2 * p < k or w + 2 * p < k:
        raise ValueError(f"spatial dims ({h}, {w}) too small for kernel {k} with padding {p}")
    padded = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=np.float32)
    padded[:, :, p : p + h, p : p + w] = x
    ho = (h + 2 * p - k) // s + 1
    wo = (w + 2 * p - k) // s + 1
    # (n, c, ho, wo, k, k) strided view, then reorder to (c, k, k, n, ho, wo)
    win = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    cols = win.transpose(1, 4, 5, 0, 2, 3).reshape(c * k * k, n * ho * wo)
    return np.ascontiguousarray(cols)


def im2col_matmul_conv(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Convolution as one GEMM over the im2col matrix. groups == 1 only."""
    if spec.groups != 1:
        raise ValueError("im2col_matmul_conv supports groups == 1 only")
    x = _require_nchw(x)
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ValueError(f"input has {c} channels but conv expects {spec.in_channels}")
    ho, wo = conv_output_hw(h, w, spec)
    cols = im2col(x, spec.kernel, spec.stride, spec.padding).astype(np.float64)
    w2d = spec.weight.reshape(spec.out_channels, -1).astype(np.float64)
    out = w2d @ cols
    if spec.bias is not None:
        out += spec.bias.astype(np.float64)[:, None]
    out = out.reshape(spec.out_channels, n, ho, wo).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out.astype(np.float32))


def run_conv(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Route a conv to the faster path: GEMM when groups == 1, else direct.

    Both paths share the conv2d contract (float64 accumulation, float32
    result); they may differ by accumulation order within float64, which
    the verification tolerance absorbs.
    """
    if spec.groups == 1:
        return im2col_matmul_conv(x, spec)
    return conv2d(x, spec)


def batch_norm_infer(x: np.ndarray, p: BatchNormParams) -> np.ndarray:
    """Per-channel affine normalization with frozen statistics."""
    x = _require_nchw(x)
    if x.shape[1] != p.channels:
        raise ValueError(f"input has {x.shape[1]} channels but batch norm has {p.channels}")
    x64 = x.astype(np.float64)
    inv = 1.0 / np.sqrt(p.variance.astype(np.float64) + np.float64(p.epsilon))
    g = p.gamma.astype(np.float64)
    out = (x64 - p.mean.astype(np.float64)[None, :, None, None]) * (g * inv)[
        None, :, None, None
    ] + p.beta.astype(np.float64)[None, :, None, None]
    return out.astype(np.float32)


def relu(x: np.ndarray) -> np.ndarray:
    x = _as_f32(x)
    return np.maximum(x.astype(np.float64), 0.0).astype(np.float32)


def leaky_relu(x: np.ndarray, a: float) -> np.ndarray:
    """max(a*x, x); the slope a must lie in [0, 1]."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"slope must be in [0, 1], got {a}")
    x = _as_f32(x).astype(np.float64)
    return np.maximum(a * x, x).astype(np.float32)


def relu6(x: np.ndarray) -> np.ndarray:
    x = _as_f32(x).astype(np.float64)
    return np.minimum(np.maximum(x, 0.0), 6.0).astype(np.float32)


def hard_sigmoid(x: np.ndarray) -> np.ndarray:
    """relu6(x + 3) / 6."""
    x = _as_f32(x).astype(np.float64)
    return (np.minimum(np.maximum(x + 3.0, 0.0), 6.0) / 6.0).astype(np.float32)


def hard_swish(x: np.ndarray) -> np.ndarray:
    """x * relu6(x + 3) / 6."""
    x = _as_f32(x).astype(np.float64)
    return (x * np.minimum(np.maximum(x + 3.0, 0.0), 6.0) / 6.0).astype(np.float32)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = _as_f32(x).astype(np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.astype(np.float32)


def max_pool2d(x: np.ndarray, kernel: int = 2, stride: int = 2) -> np.ndarray:
    """Non-overlapping max pooling; kernel must equal stride."""
    if kernel != stride:
        raise ValueError("max_pool2d supports kernel == stride only")
    x = _require_nchw(x)
    n, c, h, w = x.shape
    if h % kernel or w % kernel:
        raise ValueError(f"spatial dims ({h}, {w}) must be divisible by {kernel}")
    view = x.reshape(n, c, h // kernel, kernel, w // kernel, kernel)
    return view.max(axis=(3, 5))


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over the spatial axes, keeping (n, c, 1, 1)."""
    x = _require_nchw(x)
    return x.astype(np.float64).mean(axis=(2, 3), keepdims=True).astype(np.float32)


def _upsample_axis_taps(size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices and blend weight for doubling one axis.

    Output index i samples source coordinate (i + 0.5) / 2 - 0.5 (half-pixel
    centers), clamped to the valid range so border outputs replicate edges.
    """
    i = np.arange(2 * size, dtype=np.float64)
    src = np.maximum((i + 0.5) / 2.0 - 0.5, 0.0)
    lo = np.minimum(np.floor(src).astype(np.int64), size - 1)
    hi = np.minimum(lo + 1, size - 1)
    frac = src - np.floor(src)
    return lo, hi, frac


def upsample_bilinear2x(x: np.ndarray) -> np.ndarray:
    """Bilinear x2 upsampling with half-pixel centers and edge clamping."""
    x = _require_nchw(x)
    n, c, h, w = x.shape
    x64 = x.astype(np.float64)
    lo, hi, f = _upsample_axis_taps(h)
    rows = x64[:, :, lo, :] * (1.0 - f)[None, None, :, None] + x64[:, :, hi, :] * f[
        None, None, :, None
    ]
    lo, hi, f = _upsample_axis_taps(w)
    out = rows[:, :, :, lo] * (1.0 - f)[None, None, None, :] + rows[:, :, :, hi] * f[
        None, None, None, :
    ]
    return out.astype(np.float32)


def add(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise sum of two tensors of identical shape."""
    x = _require_nchw(x, "x")
    y = _require_nchw(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return (x.astype(np.float64) + y.astype(np.float64)).astype(np.float32)
