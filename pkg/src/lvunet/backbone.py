"""MobileNetV3-Large encoder prefix.

The backbone is the standard MobileNetV3-Large stem (3x3 stride-2 conv + BN
+ hard-swish into 16 channels) followed by a prefix of the fifteen inverted
residual blocks, cut after block 5, 9, or 14 depending on how much of the
encoder is delegated to fusible blocks. Block configs follow the reference
table; convolutions carry no bias (batch norm absorbs it) except the two
squeeze-excite fully connected layers which are 1x1 convs with bias.
"""

from dataclasses import dataclass

import numpy as np

from .tensor_ops import (
    BatchNormParams,
    ConvSpec,
    add,
    batch_norm_infer,
    global_avg_pool,
    hard_sigmoid,
    hard_swish,
    relu,
    run_conv,
)


@dataclass(frozen=True)
class BlockConfig:
    kernel: int
    expanded: int
    out_channels: int
    use_se: bool
    activation: str  # "relu" or "hard_swish"
    stride: int


# Inverted residual blocks 1..15 of MobileNetV3-Large. Input to block 1 is
# the 16-channel stem output; block k reads the out_channels of block k-1.
MOBILENETV3_LARGE_BLOCKS: tuple[BlockConfig, ...] = (
    BlockConfig(3, 16, 16, False, "relu", 1),
    BlockConfig(3, 64, 24, False, "relu", 2),
    BlockConfig(3, 72, 24, False, "relu", 1),
    BlockConfig(5, 72, 40, True, "relu", 2),
    BlockConfig(5, 120, 40, True, "relu", 1),
    BlockConfig(5, 120, 40, True, "relu", 1),
    BlockConfig(3, 240, 80, False, "hard_swish", 2),
    BlockConfig(3, 200, 80, False, "hard_swish", 1),
    BlockConfig(3, 184, 80, False, "hard_swish", 1),
    BlockConfig(3, 184, 80, False, "hard_swish", 1),
    BlockConfig(3, 480, 112, True, "hard_swish", 1),
    BlockConfig(3, 672, 112, True, "hard_swish", 1),
    BlockConfig(5, 672, 160, True, "hard_swish", 2),
    BlockConfig(5, 960, 160, True, "hard_swish", 1),
    BlockConfig(5, 960, 160, True, "hard_swish", 1),
)

STEM_CHANNELS = 16


def block_in_channels(index: int) -> int:
    """Input channel count of 1-based block `index`."""
    if index == 1:
        return STEM_CHANNELS
    return MOBILENETV3_LARGE_BLOCKS[index - 2].out_channels


def make_divisible(value: float, divisor: int = 8) -> int:
    """Round to the nearest multiple of divisor, never below 90% of value."""
    out = max(divisor, int(value + divisor / 2) // divisor * divisor)
    if out < 0.9 * value:
        out += divisor
    return out


def se_reduced_channels(expanded: int) -> int:
    return make_divisible(expanded / 4, 8)


@dataclass(frozen=True)
class ConvBN:
    conv: ConvSpec
    bn: BatchNormParams


@dataclass(frozen=True)
class SqueezeExcite:
    """Channel gating: x * hard_sigmoid(fc2(relu(fc1(avg(x)))))."""

    fc1: ConvSpec  # expanded -> reduced, 1x1, with bias
    fc2: ConvSpec  # reduced -> expanded, 1x1, with bias


@dataclass(frozen=True)
class InvertedResidual:
    config: BlockConfig
    expand: ConvBN | None  # absent when expanded == in_channels (block 1)
    depthwise: ConvBN
    se: SqueezeExcite | None
    project: ConvBN

    @property
    def in_channels(self) -> int:
        if self.expand is not None:
            return self.expand.conv.in_channels
        return self.depthwise.conv.in_channels


@dataclass(frozen=True)
class BackbonePrefix:
    stem: ConvBN
    blocks: tuple[InvertedResidual, ...]

    @property
    def last_block(self) -> int:
        return len(self.blocks)

    @property
    def out_channels(self) -> int:
        if self.blocks:
            return self.blocks[-1].config.out_channels
        return STEM_CHANNELS

    @property
    def out_stride(self) -> int:
        s = 2
        for b in self.blocks:
            s *= b.config.stride
        return s


def _block_act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return relu(x)
    if name == "hard_swish":
        return hard_swish(x)
    raise ValueError(f"unknown activation {name!r}")


def squeeze_excite(x: np.ndarray, se: SqueezeExcite) -> np.ndarray:
    gate = global_avg_pool(x)
    gate = relu(run_conv(gate, se.fc1))
    gate = hard_sigmoid(run_conv(gate, se.fc2))
    return (x.astype(np.float64) * gate.astype(np.float64)).astype(np.float32)


def inverted_residual(x: np.ndarray, block: InvertedResidual) -> np.ndarray:
    cfg = block.config
    h = x
    if block.expand is not None:
        h = _block_act(cfg.activation, batch_norm_infer(run_conv(h, block.expand.conv), block.expand.bn))
    h = _block_act(cfg.activation, batch_norm_infer(run_conv(h, block.depthwise.conv), block.depthwise.bn))
    if block.se is not None:
        h = squeeze_excite(h, block.se)
    h = batch_norm_infer(run_conv(h, block.project.conv), block.project.bn)  # linear bottleneck
    if cfg.stride == 1 and block.in_channels == cfg.out_channels:
        h = add(h, x)
    return h


def backbone_forward(x: np.ndarray, prefix: BackbonePrefix) -> dict[int, np.ndarray]:
    """Run the prefix and return feature taps keyed by stride.

    taps[2] is the stem output; each deeper key holds the output of the last
    block computed at that stride. The deepest tap is the prefix output.
    """
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"backbone expects (n, 3, h, w) input, got {x.shape}")
    if x.shape[2] % 32 or x.shape[3] % 32:
        raise ValueError(f"spatial dims {x.shape[2:]} must be divisible by 32")
    h = hard_swish(batch_norm_infer(run_conv(x, prefix.stem.conv), prefix.stem.bn))
    taps = {2: h}
    stride = 2
    for block in prefix.blocks:
        if block.config.stride == 2:
            stride *= 2
        h = inverted_residual(h, block)
        if stride != 2:
            taps[stride] = h
    return taps
