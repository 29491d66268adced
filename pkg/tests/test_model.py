import numpy as np
import pytest

from lvunet.container import read_container
from lvunet.model import (
    COMBINATIONS,
    build,
    forward,
    fusible_forward,
    load_model,
    named_tensors,
    save_model,
)
from lvunet.series_act import SeriesActivationParams
from lvunet.tensor_ops import ConvSpec, max_pool2d, relu


class TestCombinations:
    def test_block_counts(self):
        assert len(build("I", seed=0).encoder) == 2
        assert len(build("II", seed=0).encoder) == 3
        assert len(build("III", seed=0).encoder) == 4
        for name in COMBINATIONS:
            assert len(build(name, seed=0).decoder) == 6

    def test_channel_ladders(self):
        m = build("II", seed=0)
        assert [(b.in_channels, b.out_channels) for b in m.encoder] == [
            (80, 160), (160, 240), (240, 480)]
        assert [(b.in_channels, b.out_channels) for b in m.decoder] == [
            (480, 240), (240, 160), (160, 80), (80, 40), (40, 24), (24, 16)]
        m1 = build("I", seed=0)
        assert [(b.in_channels, b.out_channels) for b in m1.decoder] == [
            (480, 240), (240, 160), (160, 112), (112, 40), (40, 24), (24, 16)]

    def test_unknown_combination(self):
        with pytest.raises(ValueError, match="combination"):
            build("IV", seed=0)

    def test_input_divisor_is_128(self):
        for name in COMBINATIONS:
            assert build(name, seed=0).input_divisor == 128


class TestFusibleBlock:
    def test_encoder_shape(self):
        m = build("II", seed=0)
        x = np.random.default_rng(0).uniform(-1, 1, (1, 80, 16, 16)).astype(np.float32)
        out = fusible_forward(x, m.encoder[0], slope=0.5)
        assert out.shape == (1, 160, 8, 8)

    def test_decoder_shape(self):
        m = build("II", seed=0)
        x = np.random.default_rng(1).uniform(-1, 1, (1, 480, 2, 2)).astype(np.float32)
        out = fusible_forward(x, m.decoder[0], slope=0.5)
        assert out.shape == (1, 240, 4, 4)

    def test_identity_deploy_encoder_is_pool_of_relu(self):
        from lvunet.model import FusibleBlock
        c = 4
        eye = np.eye(c, dtype=np.float32).reshape(c, c, 1, 1)
        block = FusibleBlock(
            "encoder", "deploy",
            SeriesActivationParams(0, np.ones((c, 1, 1), dtype=np.float32),
                                   np.zeros(c, dtype=np.float32)),
            conv=ConvSpec(c, c, 1, weight=eye, bias=np.zeros(c, dtype=np.float32)),
        )
        x = np.random.default_rng(2).uniform(-1, 1, (1, c, 6, 6)).astype(np.float32)
        np.testing.assert_allclose(fusible_forward(x, block),
                                   relu(max_pool2d(x)), atol=1e-6)

    def test_train_slope_validated(self):
        m = build("II", seed=0)
        x = np.zeros((1, 80, 4, 4), dtype=np.float32)
        with pytest.raises(ValueError, match="slope"):
            fusible_forward(x, m.encoder[0], slope=1.5)


class TestForward:
    def test_shapes_all_combinations(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=(1, 3, 128, 128)).astype(np.float32)
        for name in COMBINATIONS:
            m = build(name, seed=0)
            out = forward(m, x, slope=0.5)
            assert out.shape == (1, 1, 128, 128)
            assert np.all(np.isfinite(out))

    def test_multiclass_and_batch(self):
        m = build("II", num_classes=3, seed=0)
        x = np.random.default_rng(4).uniform(0, 1, (2, 3, 128, 128)).astype(np.float32)
        assert forward(m, x, 1.0).shape == (2, 3, 128, 128)

    def test_indivisible_input_names_divisor(self):
        m = build("II", seed=0)
        with pytest.raises(ValueError, match="128"):
            forward(m, np.zeros((1, 3, 192, 128), dtype=np.float32), 1.0)

    def test_wrong_channels(self):
        m = build("II", seed=0)
        with pytest.raises(ValueError, match="channels"):
            forward(m, np.zeros((1, 4, 128, 128), dtype=np.float32), 1.0)

    def test_skip_sensitivity(self):
        # zeroing a skip tensor must change the output
        m = build("II", seed=0)
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, size=(1, 3, 128, 128)).astype(np.float32)
        base = forward(m, x, 1.0)

        import lvunet.model as model_mod
        original = model_mod.backbone_forward

        def patched(inp, prefix):
            taps = original(inp, prefix)
            taps[2] = np.zeros_like(taps[2])
            return taps

        model_mod.backbone_forward = patched
        try:
            altered = forward(m, x, 1.0)
        finally:
            model_mod.backbone_forward = original
        assert np.max(np.abs(base - altered)) > 0

    def test_concat_skip_mode(self):
        m = build("II", skip_mode="concat", seed=0)
        assert m.reducers is not None and len(m.reducers) == 6
        assert m.reducers[0].in_channels == 480 and m.reducers[0].out_channels == 240
        x = np.random.default_rng(6).uniform(0, 1, (1, 3, 128, 128)).astype(np.float32)
        assert forward(m, x, 1.0).shape == (1, 1, 128, 128)


class TestDeterminism:
    def test_same_seed_identical_bytes(self):
        a = named_tensors(build("II", seed=7))
        b = named_tensors(build("II", seed=7))
        assert [n for n, _ in a] == [n for n, _ in b]
        for (_, ta), (_, tb) in zip(a, b):
            assert ta.tobytes() == tb.tobytes()

    def test_different_seed_differs(self):
        a = dict(named_tensors(build("II", seed=0)))
        b = dict(named_tensors(build("II", seed=1)))
        assert a["head.conv.weight"].tobytes() != b["head.conv.weight"].tobytes()


class TestSerialization:
    def test_round_trip_bytes(self, tmp_path):
        m = build("II", seed=3)
        p1 = tmp_path / "a.lvw"
        p2 = tmp_path / "b.lvw"
        save_model(m, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_forward_identical(self, tmp_path):
        m = build("II", seed=4)
        path = tmp_path / "m.lvw"
        save_model(m, path)
        loaded = load_model(path)
        x = np.random.default_rng(7).uniform(0, 1, (1, 3, 128, 128)).astype(np.float32)
        np.testing.assert_array_equal(forward(m, x, 0.5), forward(loaded, x, 0.5))

    def test_weight_names_follow_convention(self, tmp_path):
        m = build("II", seed=0)
        path = tmp_path / "m.lvw"
        save_model(m, path)
        names = set(read_container(path).names())
        for expected in (
            "backbone.init.conv.weight", "backbone.init.bn.gamma",
            "backbone.r1.dw.conv.weight", "backbone.r2.expand.conv.weight",
            "backbone.r4.se.fc1.conv.weight", "backbone.r4.se.fc1.conv.bias",
            "backbone.r9.project.bn.var",
            "enc.0.conv1.weight", "enc.0.bn.mean", "enc.2.conv2.bias",
            "enc.1.act.weights", "dec.5.act.bias", "head.conv.weight",
            "head.conv.bias",
        ):
            assert expected in names
        assert not any(n.startswith("backbone.r10") for n in names)

    def test_deploy_names(self, tmp_path):
        from lvunet.reparam import to_deploy
        m, _ = to_deploy(build("II", seed=0))
        path = tmp_path / "d.lvw"
        save_model(m, path)
        names = set(read_container(path).names())
        assert "enc.0.conv.weight" in names and "enc.0.conv.bias" in names
        assert "enc.0.conv1.weight" not in names
        assert "dec.3.bn.gamma" not in names

    def test_missing_tensor_named_in_error(self, tmp_path):
        m = build("II", seed=0)
        entries = [(n, a) for n, a in named_tensors(m) if n != "enc.1.conv2.weight"]
        from lvunet.container import write_container
        path = tmp_path / "broken.lvw"
        write_container(entries, path)
        with pytest.raises(KeyError, match="enc.1.conv2.weight"):
            load_model(path)

    def test_load_backbone_from_saved_model(self, tmp_path):
        from lvunet.backbone import backbone_forward
        from lvunet.model import load_backbone
        m = build("II", seed=4)
        path = tmp_path / "m.lvw"
        save_model(m, path)
        prefix = load_backbone(path, last_block=9)
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, size=(1, 3, 64, 64)).astype(np.float32)
        got = backbone_forward(x, prefix)
        want = backbone_forward(x, m.backbone)
        assert sorted(got) == sorted(want)
        for stride in want:
            np.testing.assert_array_equal(got[stride], want[stride])

    def test_load_backbone_missing_blocks(self, tmp_path):
        from lvunet.model import load_backbone
        m = build("II", seed=0)  # keeps r1..r9 only
        path = tmp_path / "m.lvw"
        save_model(m, path)
        with pytest.raises(KeyError, match="backbone.r10"):
            load_backbone(path, last_block=14)
        with pytest.raises(ValueError, match="last_block"):
            load_backbone(path, last_block=0)

    def test_zero_weights_zero_logits(self):
        # bias-free all-zero build propagates zeros through every path
        m = build("II", seed=0)
        zeroed = []
        for name, arr in named_tensors(m):
            if name.startswith("meta.") or name.endswith(".eps"):
                zeroed.append((name, arr))
            elif name.endswith(".var"):
                zeroed.append((name, np.ones_like(arr)))
            else:
                zeroed.append((name, np.zeros_like(arr)))
        from lvunet.container import WeightContainer
        c = WeightContainer()
        for name, arr in zeroed:
            c.add(name, arr)
        zm = load_model(c)
        x = np.zeros((1, 3, 128, 128), dtype=np.float32)
        np.testing.assert_array_equal(forward(zm, x, 1.0), 0.0)
