"""Structural re-parametrization and cost accounting.

Folding rules, each defined by its post-condition "the merged conv computes
what the pair computed":

    conv + batch norm:  W'[o] = W[o] * g[o] / sqrt(var[o] + eps)
                        B'[o] = (B[o] - mean[o]) * g[o] / sqrt(var[o] + eps) + beta[o]

    1x1 conv pair:      M = W_outer @ W_inner    (as out x in matrices)
                        B = W_outer @ B_inner + B_outer

A train-mode fusible block conv1 -> bn -> leaky_relu(a) -> conv2 collapses
to the single deploy conv merge(fuse(conv1, bn), conv2) exactly when a = 1
(the activation is then the identity). to_deploy() applies this per block
and leaves the backbone and head untouched; backbone conv/BN pairs are
deliberately not folded.

Cost accounting counts multiply-accumulates: a conv costs
out_c * (in_c / groups) * k^2 per output position; batch norm, every
elementwise activation, pooling, and residual/skip adds cost 1 per element;
bilinear 2x upsampling costs 4 per output element (its four taps); the
series activation costs its depthwise-conv equivalent (2n+1)^2 per element.
"""

from dataclasses import dataclass, replace

import numpy as np

from .backbone import BackbonePrefix, InvertedResidual, se_reduced_channels
from .model import FusibleBlock, LVUNet, fusible_forward, named_tensors
from .tensor_ops import BatchNormParams, ConvSpec, conv_output_hw


def fuse_conv_bn(spec: ConvSpec, bn: BatchNormParams) -> ConvSpec:
    """Fold frozen batch norm statistics into the preceding conv."""
    if bn.channels != spec.out_channels:
        raise ValueError(
            f"batch norm has {bn.channels} channels but conv produces {spec.out_channels}")
    var = bn.variance.astype(np.float64) + np.float64(bn.epsilon)
    if np.any(var <= 0.0):
        raise ValueError("variance + epsilon must be positive everywhere")
    scale = bn.gamma.astype(np.float64) / np.sqrt(var)
    weight = (spec.weight.astype(np.float64) * scale[:, None, None, None]).astype(np.float32)
    bias = spec.bias.astype(np.float64) if spec.bias is not None else np.zeros(
        spec.out_channels, dtype=np.float64)
    bias = ((bias - bn.mean.astype(np.float64)) * scale + bn.beta.astype(np.float64)).astype(
        np.float32)
    return replace(spec, weight=weight, bias=bias)


def merge_conv1x1(inner: ConvSpec, outer: ConvSpec) -> ConvSpec:
    """Collapse outer(inner(x)) for two stacked 1x1 convolutions."""
    for name, spec in (("inner", inner), ("outer", outer)):
        if spec.kernel != 1 or spec.stride != 1 or spec.padding != 0 or spec.groups != 1:
            raise ValueError(f"{name} conv must be 1x1, stride 1, padding 0, groups 1")
    if outer.in_channels != inner.out_channels:
        raise ValueError(
            f"outer reads {outer.in_channels} channels but inner produces {inner.out_channels}")
    wi = inner.weight.reshape(inner.out_channels, inner.in_channels).astype(np.float64)
    wo = outer.weight.reshape(outer.out_channels, outer.in_channels).astype(np.float64)
    weight = (wo @ wi).astype(np.float32).reshape(
        outer.out_channels, inner.in_channels, 1, 1)
    bi = inner.bias.astype(np.float64) if inner.bias is not None else np.zeros(
        inner.out_channels, dtype=np.float64)
    bo = outer.bias.astype(np.float64) if outer.bias is not None else np.zeros(
        outer.out_channels, dtype=np.float64)
    bias = (wo @ bi + bo).astype(np.float32)
    return ConvSpec(inner.in_channels, outer.out_channels, 1, weight=weight, bias=bias)


@dataclass(frozen=True)
class BlockFusion:
    """One fusible block's before/after accounting."""

    name: str
    original_params: int
    fused_params: int
    max_discrepancy: float


@dataclass(frozen=True)
class FusionReport:
    blocks: tuple[BlockFusion, ...]
    original_params: int
    fused_params: int

    @property
    def max_discrepancy(self) -> float:
        return max((b.max_discrepancy for b in self.blocks), default=0.0)


def _block_params(block: FusibleBlock) -> int:
    total = block.act.weights.size + block.act.bias.size
    if block.mode == "train":
        total += block.conv1.weight.size + block.conv1.bias.size
        total += 4 * block.bn.channels
        total += block.conv2.weight.size + block.conv2.bias.size
    else:
        total += block.conv.weight.size + block.conv.bias.size
    return total


def _fuse_block(block: FusibleBlock) -> FusibleBlock:
    fused = merge_conv1x1(fuse_conv_bn(block.conv1, block.bn), block.conv2)
    return FusibleBlock(block.kind, "deploy", block.act, conv=fused)


def _probe_gap(train_block: FusibleBlock, deploy_block: FusibleBlock, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(1, train_block.in_channels, 8, 8)).astype(np.float32)
    a = fusible_forward(x, train_block, slope=1.0)
    b = fusible_forward(x, deploy_block)
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def to_deploy(model: LVUNet) -> tuple[LVUNet, FusionReport]:
    """Fold every fusible block; backbone and head pass through unchanged.

    Only valid on a train-mode model (re-folding deployed weights would
    silently double-apply the transform). Each folded block is probed with
    a fixed random input at slope 1 and the report records the largest
    elementwise gap seen.
    """
    if model.mode != "train":
        raise ValueError("model is already in deploy mode")
    fusions = []
    new_blocks: dict[str, list[FusibleBlock]] = {"enc": [], "dec": []}
    for group, blocks in (("enc", model.encoder), ("dec", model.decoder)):
        for i, block in enumerate(blocks):
            fused = _fuse_block(block)
            new_blocks[group].append(fused)
            fusions.append(BlockFusion(
                name=f"{group}.{i}",
                original_params=_block_params(block),
                fused_params=_block_params(fused),
                max_discrepancy=_probe_gap(block, fused, seed=i),
            ))
    deployed = LVUNet(
        combination=model.combination,
        mode="deploy",
        skip_mode=model.skip_mode,
        series_n=model.series_n,
        num_classes=model.num_classes,
        backbone=model.backbone,
        encoder=tuple(new_blocks["enc"]),
        decoder=tuple(new_blocks["dec"]),
        head=model.head,
        reducers=model.reducers,
    )
    report = FusionReport(
        blocks=tuple(fusions),
        original_params=count_params(model)[0],
        fused_params=count_params(deployed)[0],
    )
    return deployed, report


def count_params(model: LVUNet) -> tuple[int, dict[str, int]]:
    """Stored float count (weights, biases, the four BN vectors, series
    kernels) with a per-module breakdown. BN epsilon and the meta scalars
    are bookkeeping, not parameters."""
    breakdown: dict[str, int] = {}
    for name, arr in named_tensors(model):
        if name.startswith("meta.") or name.endswith(".eps"):
            continue
        parts = name.split(".")
        module = parts[0] if parts[0] in ("backbone", "head") else f"{parts[0]}.{parts[1]}"
        breakdown[module] = breakdown.get(module, 0) + arr.size
    return sum(breakdown.values()), breakdown


def _conv_macs(spec: ConvSpec, h: int, w: int) -> tuple[int, int, int]:
    ho, wo = conv_output_hw(h, w, spec)
    macs = spec.out_channels * (spec.in_channels // spec.groups) * spec.kernel ** 2 * ho * wo
    return macs, ho, wo


def _block_flops(block: InvertedResidual, h: int, w: int) -> tuple[int, int, int]:
    cfg = block.config
    total = 0
    if block.expand is not None:
        m, h, w = _conv_macs(block.expand.conv, h, w)
        total += m + 2 * cfg.expanded * h * w  # bn + activation
    m, h, w = _conv_macs(block.depthwise.conv, h, w)
    total += m + 2 * cfg.expanded * h * w
    if block.se is not None:
        reduced = se_reduced_channels(cfg.expanded)
        total += cfg.expanded * h * w            # global average pool reads
        total += block.se.fc1.out_channels * cfg.expanded + reduced  # fc1 + relu
        total += block.se.fc2.out_channels * reduced + cfg.expanded  # fc2 + hard sigmoid
        total += cfg.expanded * h * w            # channel scaling
    m, h, w = _conv_macs(block.project.conv, h, w)
    total += m + cfg.out_channels * h * w        # bn, no activation
    if cfg.stride == 1 and block.in_channels == cfg.out_channels:
        total += cfg.out_channels * h * w        # residual add
    return total, h, w


def _fusible_flops(block: FusibleBlock, h: int, w: int) -> tuple[int, int, int]:
    total = 0
    if block.mode == "train":
        m, h, w = _conv_macs(block.conv1, h, w)
        total += m + 2 * block.conv1.out_channels * h * w  # bn + leaky relu
        m, h, w = _conv_macs(block.conv2, h, w)
        total += m
    else:
        m, h, w = _conv_macs(block.conv, h, w)
        total += m
    c = block.out_channels
    if block.kind == "encoder":
        h, w = h // 2, w // 2
        total += c * h * w                      # max pool, 1 per output
    else:
        h, w = h * 2, w * 2
        total += 4 * c * h * w                  # bilinear, 4 taps per output
    total += (2 * block.act.n + 1) ** 2 * c * h * w
    return total, h, w


def _backbone_flops(prefix: BackbonePrefix, h: int, w: int) -> tuple[dict[str, int], int, int]:
    per: dict[str, int] = {}
    m, h, w = _conv_macs(prefix.stem.conv, h, w)
    per["backbone"] = m + 2 * prefix.stem.conv.out_channels * h * w
    for block in prefix.blocks:
        m, h, w = _block_flops(block, h, w)
        per["backbone"] += m
    return per, h, w


def count_flops(model: LVUNet, height: int, width: int) -> tuple[int, dict[str, int]]:
    """Multiply-accumulate count of one forward pass at the given input
    size, with the same per-module breakdown keys as count_params."""
    d = model.input_divisor
    if height % d or width % d:
        raise ValueError(f"spatial dims ({height}, {width}) must be divisible by {d}")
    breakdown, h, w = _backbone_flops(model.backbone, height, width)
    for i, block in enumerate(model.encoder):
        m, h, w = _fusible_flops(block, h, w)
        breakdown[f"enc.{i}"] = m
    for i, block in enumerate(model.decoder):
        m, h, w = _fusible_flops(block, h, w)
        c = block.out_channels
        if model.skip_mode == "add":
            m += c * h * w
        else:
            m += model.reducers[i].out_channels * model.reducers[i].in_channels * h * w
        breakdown[f"dec.{i}"] = m
    h, w = h * 2, w * 2
    head, _, _ = _conv_macs(model.head, h, w)
    breakdown["head"] = head + 4 * model.head.in_channels * h * w
    return sum(breakdown.values()), breakdown
