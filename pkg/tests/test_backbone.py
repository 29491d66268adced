import numpy as np
import pytest

import lvunet
from lvunet.backbone import (
    MOBILENETV3_LARGE_BLOCKS,
    backbone_forward,
    block_in_channels,
    make_divisible,
    se_reduced_channels,
    squeeze_excite,
)
from lvunet.model import build
from lvunet.reparam import count_params
from lvunet.tensor_ops import ConvSpec

# Parameter count of the combination-II prefix (stem + blocks 1..9), frozen
# once from the block table: conv weights, SE biases, and 4 BN floats per
# channel.
BACKBONE_II_PARAMS = 165152


class TestBlockTable:
    def test_fifteen_blocks(self):
        assert len(MOBILENETV3_LARGE_BLOCKS) == 15

    def test_key_rows(self):
        b = MOBILENETV3_LARGE_BLOCKS
        assert (b[0].kernel, b[0].expanded, b[0].out_channels, b[0].use_se,
                b[0].activation, b[0].stride) == (3, 16, 16, False, "relu", 1)
        assert (b[3].kernel, b[3].expanded, b[3].out_channels, b[3].use_se,
                b[3].activation, b[3].stride) == (5, 72, 40, True, "relu", 2)
        assert (b[10].kernel, b[10].expanded, b[10].out_channels, b[10].use_se,
                b[10].activation, b[10].stride) == (3, 480, 112, True, "hard_swish", 1)
        assert (b[13].kernel, b[13].expanded, b[13].out_channels, b[13].use_se,
                b[13].activation, b[13].stride) == (5, 960, 160, True, "hard_swish", 1)

    def test_in_channels_chain(self):
        assert block_in_channels(1) == 16
        assert block_in_channels(2) == 16
        assert block_in_channels(4) == 24
        assert block_in_channels(7) == 40
        assert block_in_channels(11) == 80
        assert block_in_channels(13) == 112

    def test_make_divisible(self):
        # Rounds to the nearest multiple, but never below 90% of the input:
        # 18 rounds down to 16, which is under 16.2, so it bumps up to 24.
        assert make_divisible(18, 8) == 24
        assert make_divisible(16, 8) == 16
        assert make_divisible(30, 8) == 32
        assert make_divisible(120, 8) == 120
        assert make_divisible(4, 8) == 8

    def test_se_reduction(self):
        assert se_reduced_channels(72) == 24
        assert se_reduced_channels(120) == 32
        assert se_reduced_channels(480) == 120
        assert se_reduced_channels(672) == 168
        assert se_reduced_channels(960) == 240

    def test_r1_has_no_expand(self):
        model = build("II", seed=0)
        assert model.backbone.blocks[0].expand is None
        assert all(b.expand is not None for b in model.backbone.blocks[1:])

    def test_weight_shapes(self):
        model = build("II", seed=0)
        assert model.backbone.stem.conv.weight.shape == (16, 3, 3, 3)
        r2 = model.backbone.blocks[1]
        assert r2.expand.conv.weight.shape == (64, 16, 1, 1)
        assert r2.depthwise.conv.weight.shape == (64, 1, 3, 3)
        assert r2.project.conv.weight.shape == (24, 64, 1, 1)
        r4 = model.backbone.blocks[3]
        assert r4.depthwise.conv.weight.shape == (72, 1, 5, 5)
        assert r4.se.fc1.weight.shape == (24, 72, 1, 1)
        assert r4.se.fc1.bias.shape == (24,)
        assert r4.se.fc2.weight.shape == (72, 24, 1, 1)


class TestSqueezeExcite:
    def test_zero_input_gates_to_zero(self):
        rng = np.random.default_rng(0)
        model = build("II", seed=0)
        se = model.backbone.blocks[3].se
        x = np.zeros((1, 72, 4, 4), dtype=np.float32)
        assert np.all(squeeze_excite(x, se) == 0)

    def test_zero_fc_weights_halve(self):
        c, r = 8, 4
        se = lvunet.SqueezeExcite(
            fc1=ConvSpec(c, r, 1, weight=np.zeros((r, c, 1, 1), dtype=np.float32),
                         bias=np.zeros(r, dtype=np.float32)),
            fc2=ConvSpec(r, c, 1, weight=np.zeros((c, r, 1, 1), dtype=np.float32),
                         bias=np.zeros(c, dtype=np.float32)),
        )
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, size=(1, c, 5, 5)).astype(np.float32)
        np.testing.assert_allclose(squeeze_excite(x, se), x / 2.0, atol=1e-6)


class TestForward:
    def test_tap_table_combination_II(self):
        model = build("II", seed=0)
        x = np.random.default_rng(2).uniform(0, 1, size=(1, 3, 256, 256)).astype(np.float32)
        taps = backbone_forward(x, model.backbone)
        assert sorted(taps) == [2, 4, 8, 16]
        assert taps[2].shape == (1, 16, 128, 128)
        assert taps[4].shape == (1, 24, 64, 64)
        assert taps[8].shape == (1, 40, 32, 32)
        assert taps[16].shape == (1, 80, 16, 16)
        for v in taps.values():
            assert np.all(np.isfinite(v))

    def test_tap_table_combination_III(self):
        model = build("III", seed=0)
        x = np.random.default_rng(3).uniform(0, 1, size=(1, 3, 128, 128)).astype(np.float32)
        taps = backbone_forward(x, model.backbone)
        assert sorted(taps) == [2, 4, 8]
        assert taps[8].shape == (1, 40, 16, 16)

    def test_tap_table_combination_I(self):
        model = build("I", seed=0)
        x = np.random.default_rng(4).uniform(0, 1, size=(1, 3, 128, 128)).astype(np.float32)
        taps = backbone_forward(x, model.backbone)
        assert sorted(taps) == [2, 4, 8, 16, 32]
        assert taps[16].shape == (1, 112, 8, 8)  # r12 is the last stride-16 block
        assert taps[32].shape == (1, 160, 4, 4)

    def test_stride2_tap_is_stem_output(self):
        # r1 keeps stride 2 but must not displace the stem tap
        model = build("II", seed=0)
        x = np.random.default_rng(5).uniform(0, 1, size=(1, 3, 64, 64)).astype(np.float32)
        taps = backbone_forward(x, model.backbone)
        from lvunet.tensor_ops import batch_norm_infer, run_conv, hard_swish
        stem = hard_swish(batch_norm_infer(run_conv(x, model.backbone.stem.conv),
                                           model.backbone.stem.bn))
        np.testing.assert_array_equal(taps[2], stem)

    def test_wrong_channel_count(self):
        model = build("II", seed=0)
        with pytest.raises(ValueError, match="3"):
            backbone_forward(np.zeros((1, 1, 64, 64), dtype=np.float32), model.backbone)

    def test_indivisible_input(self):
        model = build("II", seed=0)
        with pytest.raises(ValueError, match="divisible"):
            backbone_forward(np.zeros((1, 3, 60, 64), dtype=np.float32), model.backbone)

    def test_residual_identity_when_branch_dead(self):
        # zero gamma in the project BN kills the branch; residual passes x
        model = build("II", seed=0)
        r5 = model.backbone.blocks[4]  # stride 1, 40 -> 40: residual applies
        from dataclasses import replace
        from lvunet.tensor_ops import BatchNormParams
        dead_bn = BatchNormParams(np.zeros(40), np.zeros(40), np.zeros(40),
                                  np.ones(40), epsilon=1e-3)
        dead = replace(r5, project=lvunet.ConvBN(r5.project.conv, dead_bn))
        from lvunet.backbone import inverted_residual
        x = np.random.default_rng(6).uniform(-1, 1, size=(1, 40, 8, 8)).astype(np.float32)
        np.testing.assert_array_equal(inverted_residual(x, dead), x)


class TestFrozenParamCount:
    def test_combination_II_prefix(self):
        model = build("II", seed=0)
        total, breakdown = count_params(model)
        assert breakdown["backbone"] == BACKBONE_II_PARAMS
