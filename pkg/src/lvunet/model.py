"""LV-UNet model: structure, seeded initialization, forward pass, save/load.

A model is a MobileNetV3-Large prefix, a chain of fusible encoder blocks,
a mirrored chain of fusible decoder blocks with skip connections, and a 1x1
classifier head. Fusible blocks exist in two shapes:

    train:  series_act(resample(conv2(leaky_relu(bn(conv1(x)), a))))
    deploy: series_act(resample(conv(x)))

conv1/conv2/conv are all 1x1 so that conv1+bn+conv2 folds into the single
deploy conv once the slope a reaches 1. Resampling is 2x2 max pooling in the
encoder and bilinear 2x upsampling in the decoder, placed after the convs
and before the series activation. Skips join after the decoder block's
activation, either by elementwise add (channel counts match by design) or
by concatenation followed by a learned 1x1 reduction.
"""

from dataclasses import dataclass, field

import numpy as np

from .backbone import (
    MOBILENETV3_LARGE_BLOCKS,
    STEM_CHANNELS,
    BackbonePrefix,
    ConvBN,
    InvertedResidual,
    SqueezeExcite,
    backbone_forward,
    block_in_channels,
    se_reduced_channels,
)
from .container import WeightContainer, read_container, write_container
from .series_act import SeriesActivationParams, series_act
from .tensor_ops import (
    BatchNormParams,
    ConvSpec,
    _require_nchw,
    add,
    batch_norm_infer,
    leaky_relu,
    max_pool2d,
    run_conv,
    upsample_bilinear2x,
)

BACKBONE_BN_EPS = float(np.float32(1e-3))
FUSIBLE_BN_EPS = float(np.float32(1e-5))


@dataclass(frozen=True)
class CombinationSpec:
    """How much encoder is kept pre-trained vs. made fusible."""

    name: str
    last_block: int  # backbone prefix ends after this 1-based block
    encoder: tuple[tuple[int, int], ...]  # fusible encoder (in, out) channels
    decoder: tuple[tuple[int, int], ...]


COMBINATIONS: dict[str, CombinationSpec] = {
    "I": CombinationSpec(
        "I",
        last_block=14,
        encoder=((160, 240), (240, 480)),
        decoder=((480, 240), (240, 160), (160, 112), (112, 40), (40, 24), (24, 16)),
    ),
    "II": CombinationSpec(
        "II",
        last_block=9,
        encoder=((80, 160), (160, 240), (240, 480)),
        decoder=((480, 240), (240, 160), (160, 80), (80, 40), (40, 24), (24, 16)),
    ),
    "III": CombinationSpec(
        "III",
        last_block=5,
        encoder=((40, 80), (80, 160), (160, 240), (240, 480)),
        decoder=((480, 240), (240, 160), (160, 80), (80, 40), (40, 24), (24, 16)),
    ),
}


@dataclass(frozen=True)
class FusibleBlock:
    kind: str  # "encoder" (max pool) or "decoder" (bilinear upsample)
    mode: str  # "train" or "deploy"
    act: SeriesActivationParams
    conv1: ConvSpec | None = None
    bn: BatchNormParams | None = None
    conv2: ConvSpec | None = None
    conv: ConvSpec | None = None

    def __post_init__(self):
        if self.kind not in ("encoder", "decoder"):
            raise ValueError(f"kind must be encoder or decoder, got {self.kind!r}")
        if self.mode == "train":
            if self.conv1 is None or self.bn is None or self.conv2 is None or self.conv is not None:
                raise ValueError("train-mode block needs conv1/bn/conv2 and no fused conv")
        elif self.mode == "deploy":
            if self.conv is None or self.conv1 is not None or self.bn is not None or self.conv2 is not None:
                raise ValueError("deploy-mode block needs a fused conv only")
        else:
            raise ValueError(f"mode must be train or deploy, got {self.mode!r}")

    @property
    def in_channels(self) -> int:
        return (self.conv1 or self.conv).in_channels

    @property
    def out_channels(self) -> int:
        return (self.conv2 or self.conv).out_channels


def fusible_forward(x: np.ndarray, block: FusibleBlock, slope: float = 1.0) -> np.ndarray:
    """Run one fusible block. slope is the leaky-ReLU slope a in [0, 1];
    deploy mode has no intermediate activation so slope is ignored."""
    if block.mode == "train":
        h = run_conv(x, block.conv1)
        h = batch_norm_infer(h, block.bn)
        h = leaky_relu(h, slope)
        h = run_conv(h, block.conv2)
    else:
        h = run_conv(x, block.conv)
    h = max_pool2d(h) if block.kind == "encoder" else upsample_bilinear2x(h)
    return series_act(h, block.act)


@dataclass(frozen=True)
class LVUNet:
    combination: str
    mode: str
    skip_mode: str
    series_n: int
    num_classes: int
    backbone: BackbonePrefix
    encoder: tuple[FusibleBlock, ...]
    decoder: tuple[FusibleBlock, ...]
    head: ConvSpec
    reducers: tuple[ConvSpec, ...] | None = field(default=None, repr=False)

    @property
    def input_divisor(self) -> int:
        """Spatial dims must be multiples of this (overall downsampling)."""
        return self.backbone.out_stride * (1 << len(self.encoder))


def forward(model: LVUNet, x: np.ndarray, slope: float = 1.0) -> np.ndarray:
    """Full forward pass to per-pixel class logits at input resolution."""
    x = _require_nchw(x)
    if x.shape[1] != 3:
        raise ValueError(f"model expects 3 input channels, got {x.shape[1]}")
    d = model.input_divisor
    if x.shape[2] % d or x.shape[3] % d:
        raise ValueError(f"spatial dims {x.shape[2:]} must be divisible by {d}")

    taps = backbone_forward(x, model.backbone)
    h = taps[model.backbone.out_stride]
    enc_outs = []
    for block in model.encoder:
        h = fusible_forward(h, block, slope)
        enc_outs.append(h)

    # Skip sources, deepest first: all but the last fusible encoder output,
    # then the backbone taps from the deepest stride up to the stem.
    skips = list(reversed(enc_outs[:-1]))
    skips += [taps[s] for s in sorted(taps, reverse=True)]

    for i, block in enumerate(model.decoder):
        h = fusible_forward(h, block, slope)
        if model.skip_mode == "add":
            h = add(h, skips[i])
        else:
            h = np.concatenate([h, skips[i]], axis=1)
            h = run_conv(h, model.reducers[i])

    h = upsample_bilinear2x(h)
    return run_conv(h, model.head)


# ---------------------------------------------------------------------------
# Construction. build() draws tensors from a seeded generator; load_model()
# draws them from a container. Both walk the structure in the same canonical
# order, which is also the order save_model() writes entries in.
# ---------------------------------------------------------------------------


class _RandomSource:
    """Draws tensors in walk order from one PCG64 stream."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def get(self, name: str, shape: tuple[int, ...], init) -> np.ndarray:
        kind = init[0]
        if kind == "kaiming_w":
            fan_in = int(np.prod(shape[1:]))
            bound = float(np.sqrt(6.0 / fan_in))
            return self.rng.uniform(-bound, bound, size=shape).astype(np.float32)
        if kind == "conv_b":
            bound = 1.0 / float(np.sqrt(init[1]))
            return self.rng.uniform(-bound, bound, size=shape).astype(np.float32)
        if kind == "bn_gamma":
            return self.rng.uniform(0.5, 1.5, size=shape).astype(np.float32)
        if kind == "bn_beta" or kind == "bn_mean":
            return self.rng.uniform(-0.1, 0.1, size=shape).astype(np.float32)
        if kind == "bn_var":
            return self.rng.uniform(0.64, 1.44, size=shape).astype(np.float32)
        if kind == "act_w":
            return self.rng.uniform(-0.5, 0.5, size=shape).astype(np.float32)
        if kind == "zeros":
            return np.zeros(shape, dtype=np.float32)
        if kind == "const":
            return np.full(shape, init[1], dtype=np.float32)
        raise ValueError(f"unknown init kind {kind!r} for {name}")


class _ContainerSource:
    """Looks tensors up by name; shape mismatches are hard errors."""

    def __init__(self, container: WeightContainer):
        self.container = container

    def get(self, name: str, shape: tuple[int, ...], init) -> np.ndarray:
        arr = self.container[name]
        if arr.shape != shape:
            raise ValueError(f"tensor {name} has shape {arr.shape}, expected {shape}")
        return arr


def _make_conv(src, prefix: str, in_c: int, out_c: int, kernel: int, stride: int = 1,
               padding: int = 0, groups: int = 1, bias: bool = True) -> ConvSpec:
    w = src.get(f"{prefix}.weight", (out_c, in_c // groups, kernel, kernel), ("kaiming_w",))
    b = None
    if bias:
        fan_in = (in_c // groups) * kernel * kernel
        b = src.get(f"{prefix}.bias", (out_c,), ("conv_b", fan_in))
    return ConvSpec(in_c, out_c, kernel, stride, padding, groups, weight=w, bias=b)


def _make_bn(src, prefix: str, channels: int, eps: float) -> BatchNormParams:
    gamma = src.get(f"{prefix}.gamma", (channels,), ("bn_gamma",))
    beta = src.get(f"{prefix}.beta", (channels,), ("bn_beta",))
    mean = src.get(f"{prefix}.mean", (channels,), ("bn_mean",))
    var = src.get(f"{prefix}.var", (channels,), ("bn_var",))
    eps_arr = src.get(f"{prefix}.eps", (1,), ("const", eps))
    return BatchNormParams(gamma, beta, mean, var, epsilon=float(eps_arr[0]))


def _make_conv_bn(src, prefix: str, in_c: int, out_c: int, kernel: int, stride: int,
                  padding: int, groups: int = 1, eps: float = BACKBONE_BN_EPS) -> ConvBN:
    conv = _make_conv(src, f"{prefix}.conv", in_c, out_c, kernel, stride, padding, groups, bias=False)
    return ConvBN(conv, _make_bn(src, f"{prefix}.bn", out_c, eps))


def _make_backbone(src, last_block: int) -> BackbonePrefix:
    stem = _make_conv_bn(src, "backbone.init", 3, STEM_CHANNELS, 3, stride=2, padding=1)
    blocks = []
    for k in range(1, last_block + 1):
        cfg = MOBILENETV3_LARGE_BLOCKS[k - 1]
        in_c = block_in_channels(k)
        name = f"backbone.r{k}"
        expand = None
        if cfg.expanded != in_c:
            expand = _make_conv_bn(src, f"{name}.expand", in_c, cfg.expanded, 1, 1, 0)
        pad = cfg.kernel // 2
        dw = _make_conv_bn(src, f"{name}.dw", cfg.expanded, cfg.expanded, cfg.kernel,
                           cfg.stride, pad, groups=cfg.expanded)
        se = None
        if cfg.use_se:
            reduced = se_reduced_channels(cfg.expanded)
            se = SqueezeExcite(
                fc1=_make_conv(src, f"{name}.se.fc1.conv", cfg.expanded, reduced, 1),
                fc2=_make_conv(src, f"{name}.se.fc2.conv", reduced, cfg.expanded, 1),
            )
        project = _make_conv_bn(src, f"{name}.project", cfg.expanded, cfg.out_channels, 1, 1, 0)
        blocks.append(InvertedResidual(cfg, expand, dw, se, project))
    return BackbonePrefix(stem, tuple(blocks))


def _make_act(src, prefix: str, channels: int, n: int) -> SeriesActivationParams:
    k = 2 * n + 1
    w = src.get(f"{prefix}.weights", (channels, k, k), ("act_w",))
    b = src.get(f"{prefix}.bias", (channels,), ("zeros",))
    return SeriesActivationParams(n, w, b)


def _make_fusible(src, prefix: str, kind: str, mode: str, in_c: int, out_c: int,
                  series_n: int) -> FusibleBlock:
    if mode == "train":
        conv1 = _make_conv(src, f"{prefix}.conv1", in_c, out_c, 1)
        bn = _make_bn(src, f"{prefix}.bn", out_c, FUSIBLE_BN_EPS)
        conv2 = _make_conv(src, f"{prefix}.conv2", out_c, out_c, 1)
        act = _make_act(src, f"{prefix}.act", out_c, series_n)
        return FusibleBlock(kind, mode, act, conv1=conv1, bn=bn, conv2=conv2)
    conv = _make_conv(src, f"{prefix}.conv", in_c, out_c, 1)
    act = _make_act(src, f"{prefix}.act", out_c, series_n)
    return FusibleBlock(kind, mode, act, conv=conv)


def _assemble(combination: str, series_n: int, num_classes: int, skip_mode: str,
              mode: str, src) -> LVUNet:
    spec = COMBINATIONS[combination]
    backbone = _make_backbone(src, spec.last_block)
    encoder = tuple(
        _make_fusible(src, f"enc.{i}", "encoder", mode, cin, cout, series_n)
        for i, (cin, cout) in enumerate(spec.encoder)
    )
    decoder = []
    reducers = [] if skip_mode == "concat" else None
    for i, (cin, cout) in enumerate(spec.decoder):
        decoder.append(_make_fusible(src, f"dec.{i}", "decoder", mode, cin, cout, series_n))
        if skip_mode == "concat":
            reducers.append(_make_conv(src, f"dec.{i}.reduce", 2 * cout, cout, 1))
    head = _make_conv(src, "head.conv", spec.decoder[-1][1], num_classes, 1)
    return LVUNet(
        combination=combination,
        mode=mode,
        skip_mode=skip_mode,
        series_n=series_n,
        num_classes=num_classes,
        backbone=backbone,
        encoder=encoder,
        decoder=tuple(decoder),
        head=head,
        reducers=tuple(reducers) if reducers is not None else None,
    )


def _validate_meta(combination: str, series_n: int, num_classes: int, skip_mode: str, mode: str):
    if combination not in COMBINATIONS:
        raise ValueError(f"combination must be one of I, II, III, got {combination!r}")
    if series_n < 0:
        raise ValueError(f"series_n must be >= 0, got {series_n}")
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if skip_mode not in ("add", "concat"):
        raise ValueError(f"skip_mode must be add or concat, got {skip_mode!r}")
    if mode not in ("train", "deploy"):
        raise ValueError(f"mode must be train or deploy, got {mode!r}")


def build(combination: str = "II", series_n: int = 1, num_classes: int = 1,
          skip_mode: str = "add", seed: int = 0, mode: str = "train") -> LVUNet:
    """Construct a model with reproducible random weights.

    All tensors are drawn from one numpy default_rng(seed) stream in the
    canonical walk order (backbone, encoder blocks, decoder blocks, head),
    so equal seeds give bit-identical weights. Conv weights are Kaiming
    uniform over fan-in, biases uniform +-1/sqrt(fan_in), BN statistics
    drawn near identity, series kernels uniform +-0.5 with zero bias.
    """
    _validate_meta(combination, series_n, num_classes, skip_mode, mode)
    return _assemble(combination, series_n, num_classes, skip_mode, mode, _RandomSource(seed))


# --- serialization ---------------------------------------------------------

_META_COMBINATION = {"I": 1.0, "II": 2.0, "III": 3.0}
_META_SKIP = {"add": 0.0, "concat": 1.0}
_META_MODE = {"train": 0.0, "deploy": 1.0}


def _scalar(value: float) -> np.ndarray:
    return np.array([value], dtype=np.float32)


def _collect_conv(out, prefix: str, conv: ConvSpec):
    out.append((f"{prefix}.weight", conv.weight))
    if conv.bias is not None:
        out.append((f"{prefix}.bias", conv.bias))


def _collect_bn(out, prefix: str, bn: BatchNormParams):
    out.append((f"{prefix}.gamma", bn.gamma))
    out.append((f"{prefix}.beta", bn.beta))
    out.append((f"{prefix}.mean", bn.mean))
    out.append((f"{prefix}.var", bn.variance))
    out.append((f"{prefix}.eps", _scalar(bn.epsilon)))


def _collect_conv_bn(out, prefix: str, cb: ConvBN):
    _collect_conv(out, f"{prefix}.conv", cb.conv)
    _collect_bn(out, f"{prefix}.bn", cb.bn)


def _collect_fusible(out, prefix: str, block: FusibleBlock):
    if block.mode == "train":
        _collect_conv(out, f"{prefix}.conv1", block.conv1)
        _collect_bn(out, f"{prefix}.bn", block.bn)
        _collect_conv(out, f"{prefix}.conv2", block.conv2)
    else:
        _collect_conv(out, f"{prefix}.conv", block.conv)
    out.append((f"{prefix}.act.weights", block.act.weights))
    out.append((f"{prefix}.act.bias", block.act.bias))


def named_tensors(model: LVUNet) -> list[tuple[str, np.ndarray]]:
    """Every stored tensor of the model in canonical walk order, plus the
    meta.* scalars that make a container self-describing."""
    out: list[tuple[str, np.ndarray]] = []
    _collect_conv_bn(out, "backbone.init", model.backbone.stem)
    for k, block in enumerate(model.backbone.blocks, start=1):
        name = f"backbone.r{k}"
        if block.expand is not None:
            _collect_conv_bn(out, f"{name}.expand", block.expand)
        _collect_conv_bn(out, f"{name}.dw", block.depthwise)
        if block.se is not None:
            _collect_conv(out, f"{name}.se.fc1.conv", block.se.fc1)
            _collect_conv(out, f"{name}.se.fc2.conv", block.se.fc2)
        _collect_conv_bn(out, f"{name}.project", block.project)
    for i, block in enumerate(model.encoder):
        _collect_fusible(out, f"enc.{i}", block)
    for i, block in enumerate(model.decoder):
        _collect_fusible(out, f"dec.{i}", block)
        if model.reducers is not None:
            _collect_conv(out, f"dec.{i}.reduce", model.reducers[i])
    _collect_conv(out, "head.conv", model.head)
    out.append(("meta.combination", _scalar(_META_COMBINATION[model.combination])))
    out.append(("meta.series_n", _scalar(float(model.series_n))))
    out.append(("meta.num_classes", _scalar(float(model.num_classes))))
    out.append(("meta.skip_mode", _scalar(_META_SKIP[model.skip_mode])))
    out.append(("meta.mode", _scalar(_META_MODE[model.mode])))
    return out


def save_model(model: LVUNet, path) -> None:
    write_container(named_tensors(model), path)


def _decode_meta(container: WeightContainer, name: str, table: dict[str, float]) -> str:
    value = float(container[name][0])
    for key, enc in table.items():
        if value == enc:
            return key
    raise ValueError(f"container entry {name} holds unknown code {value}")


def load_model(source) -> LVUNet:
    """Rebuild a model from a container (path or WeightContainer).

    Geometry comes from the meta.* entries plus the combination table;
    weights are fetched by name, so a container missing a tensor fails
    with a KeyError naming it.
    """
    container = source if isinstance(source, WeightContainer) else read_container(source)
    combination = _decode_meta(container, "meta.combination", _META_COMBINATION)
    skip_mode = _decode_meta(container, "meta.skip_mode", _META_SKIP)
    mode = _decode_meta(container, "meta.mode", _META_MODE)
    series_n = int(container["meta.series_n"][0])
    num_classes = int(container["meta.num_classes"][0])
    _validate_meta(combination, series_n, num_classes, skip_mode, mode)
    return _assemble(combination, series_n, num_classes, skip_mode, mode,
                     _ContainerSource(container))


def load_backbone(source, last_block: int = 14) -> BackbonePrefix:
    """Rebuild just the pretrained prefix from a container of backbone.*
    entries (an exported-weights container, or any saved model that keeps
    at least last_block blocks). BN epsilons come from the per-layer
    *.bn.eps entries, never from a hard-coded default.
    """
    if not 1 <= last_block <= len(MOBILENETV3_LARGE_BLOCKS):
        raise ValueError(f"last_block must be in 1..{len(MOBILENETV3_LARGE_BLOCKS)}, "
                         f"got {last_block}")
    container = source if isinstance(source, WeightContainer) else read_container(source)
    return _make_backbone(_ContainerSource(container), last_block)
