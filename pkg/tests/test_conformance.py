"""Conformance against independently exported reference vectors.

The exporter (a separate package under exporter/) writes two containers:

    exporter/artifacts/backbone.lvw   pretrained prefix weights, engine naming
    exporter/artifacts/goldens.lvw    input/expected pairs per primitive and
                                      per backbone block, computed by the
                                      reference framework with those weights

This suite loads both and checks the engine reproduces every expected
output within 1e-3 per element. When the artifacts are missing (fresh
checkout, primary-only build) every test here skips; the primary suite
never reads these files. Set LVUNET_ARTIFACTS to point elsewhere.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from lvunet.backbone import (
    MOBILENETV3_LARGE_BLOCKS,
    backbone_forward,
    block_in_channels,
    inverted_residual,
    se_reduced_channels,
    SqueezeExcite,
    squeeze_excite,
)
from lvunet.container import read_container
from lvunet.model import load_backbone
from lvunet.tensor_ops import (
    BatchNormParams,
    ConvSpec,
    batch_norm_infer,
    hard_swish,
    run_conv,
)

ARTIFACTS = Path(os.environ.get(
    "LVUNET_ARTIFACTS", Path(__file__).resolve().parent.parent / "exporter" / "artifacts"))
BACKBONE_PATH = ARTIFACTS / "backbone.lvw"
GOLDENS_PATH = ARTIFACTS / "goldens.lvw"
TOLERANCE = 1e-3

pytestmark = pytest.mark.skipif(
    not (BACKBONE_PATH.is_file() and GOLDENS_PATH.is_file()),
    reason="exported reference artifacts not present",
)


@pytest.fixture(scope="module")
def weights():
    return read_container(BACKBONE_PATH)


@pytest.fixture(scope="module")
def goldens():
    return read_container(GOLDENS_PATH)


def assert_close(got, want, label):
    assert got.shape == tuple(want.shape), (
        f"{label}: shape {got.shape} vs expected {want.shape}")
    gap = float(np.max(np.abs(got.astype(np.float64) - want.astype(np.float64))))
    assert gap <= TOLERANCE, f"{label}: max gap {gap:.3e} > {TOLERANCE}"


class TestExportedShapes:
    def test_stem(self, weights):
        assert weights["backbone.init.conv.weight"].shape == (16, 3, 3, 3)
        for part in ("gamma", "beta", "mean", "var"):
            assert weights[f"backbone.init.bn.{part}"].shape == (16,)
        assert weights["backbone.init.bn.eps"].shape == (1,)

    @pytest.mark.parametrize("k", range(1, 15))
    def test_block_tensors(self, weights, k):
        cfg = MOBILENETV3_LARGE_BLOCKS[k - 1]
        in_c = block_in_channels(k)
        name = f"backbone.r{k}"
        if cfg.expanded != in_c:
            assert weights[f"{name}.expand.conv.weight"].shape == (
                cfg.expanded, in_c, 1, 1)
        else:
            assert f"{name}.expand.conv.weight" not in weights
        assert weights[f"{name}.dw.conv.weight"].shape == (
            cfg.expanded, 1, cfg.kernel, cfg.kernel)
        if cfg.use_se:
            reduced = se_reduced_channels(cfg.expanded)
            assert weights[f"{name}.se.fc1.conv.weight"].shape == (
                reduced, cfg.expanded, 1, 1)
            assert weights[f"{name}.se.fc1.conv.bias"].shape == (reduced,)
            assert weights[f"{name}.se.fc2.conv.weight"].shape == (
                cfg.expanded, reduced, 1, 1)
        else:
            assert f"{name}.se.fc1.conv.weight" not in weights
        assert weights[f"{name}.project.conv.weight"].shape == (
            cfg.out_channels, cfg.expanded, 1, 1)
        for sub in ("dw", "project"):
            assert weights[f"{name}.{sub}.bn.eps"].shape == (1,)

    def test_loadable_prefix(self, weights):
        prefix = load_backbone(weights, last_block=14)
        assert prefix.out_channels == 160
        assert prefix.out_stride == 32


class TestPrimitiveGoldens:
    def test_conv(self, goldens):
        x = goldens["case.conv.x"]
        w = goldens["case.conv.weight"]
        spec = ConvSpec(
            x.shape[1], w.shape[0], w.shape[2],
            stride=int(goldens["case.conv.stride"][0]),
            padding=int(goldens["case.conv.padding"][0]),
            weight=w, bias=goldens["case.conv.bias"],
        )
        assert_close(run_conv(x, spec), goldens["case.conv.y"], "conv")

    def test_batch_norm(self, goldens):
        bn = BatchNormParams(
            goldens["case.bn.gamma"], goldens["case.bn.beta"],
            goldens["case.bn.mean"], goldens["case.bn.var"],
            epsilon=float(goldens["case.bn.eps"][0]),
        )
        got = batch_norm_infer(goldens["case.bn.x"], bn)
        assert_close(got, goldens["case.bn.y"], "batch norm")

    def test_hard_swish(self, goldens):
        got = hard_swish(goldens["case.hswish.x"])
        assert_close(got, goldens["case.hswish.y"], "hard swish")

    def test_squeeze_excite(self, goldens):
        x = goldens["case.se.x"]
        fc1_w = goldens["case.se.fc1.weight"]
        fc2_w = goldens["case.se.fc2.weight"]
        se = SqueezeExcite(
            fc1=ConvSpec(x.shape[1], fc1_w.shape[0], 1,
                         weight=fc1_w, bias=goldens["case.se.fc1.bias"]),
            fc2=ConvSpec(fc1_w.shape[0], x.shape[1], 1,
                         weight=fc2_w, bias=goldens["case.se.fc2.bias"]),
        )
        assert_close(squeeze_excite(x, se), goldens["case.se.y"], "squeeze excite")


class TestBackboneGoldens:
    def test_stem(self, weights, goldens):
        prefix = load_backbone(weights, last_block=9)
        h = run_conv(goldens["case.prefix.x"], prefix.stem.conv)
        h = hard_swish(batch_norm_infer(h, prefix.stem.bn))
        assert_close(h, goldens["case.stem.y"], "stem")

    @pytest.mark.parametrize("k", range(1, 10))
    def test_block(self, weights, goldens, k):
        prefix = load_backbone(weights, last_block=9)
        x = goldens["case.stem.y" if k == 1 else f"case.r{k - 1}.y"]
        got = inverted_residual(x, prefix.blocks[k - 1])
        assert_close(got, goldens[f"case.r{k}.y"], f"block r{k}")

    def test_full_prefix_taps(self, weights, goldens):
        prefix = load_backbone(weights, last_block=9)
        taps = backbone_forward(goldens["case.prefix.x"], prefix)
        assert sorted(taps) == [2, 4, 8, 16]
        assert_close(taps[2], goldens["case.stem.y"], "tap at stride 2")
        assert_close(taps[4], goldens["case.r3.y"], "tap at stride 4")
        assert_close(taps[8], goldens["case.r6.y"], "tap at stride 8")
        assert_close(taps[16], goldens["case.r9.y"], "tap at stride 16")
