"""Operation encoder, token assembly, frame stacks and the frame encoder."""

import math

import numpy as np
import pytest

from scenedit.conditioning import (
    CONDITION_SLOTS,
    Conv2dParams,
    EncoderParams,
    FrameEncoderParams,
    ResBlockParams,
    assemble_frame_input,
    assemble_operation_tokens,
    encode_condition,
    encode_slot,
    fourier_embed,
    frame_encode,
)
from scenedit.errors import DimensionMismatch, ShapeMismatch
from scenedit.scene import Observation, OperationCommand, OperationRecord

from conftest import rng_for

PARAMS = EncoderParams.create(embed_dim=32, seed=0)


def record(kind="T", value=(10.0, -5.0, 3.0), round_index=0):
    return OperationRecord(
        command=OperationCommand("obj0", kind, value),
        source_centroid=(0.4, 0.5), source_bbox=(0.3, 0.4, 0.5, 0.6),
        target_bbox=(0.35, 0.45, 0.55, 0.65), round_index=round_index)


class TestFourier:
    def test_zero_input_gives_sin0_cos1(self):
        out = fourier_embed([0.0, 0.0], bands=4)
        sins, coss = out.reshape(2, 4, 2)[:, :, 0], out.reshape(2, 4, 2)[:, :, 1]
        np.testing.assert_array_equal(sins, 0.0)
        np.testing.assert_array_equal(coss, 1.0)

    def test_band0_at_one_is_sin_cos_pi(self):
        out = fourier_embed([1.0], bands=1)
        assert out[0] == pytest.approx(math.sin(math.pi), abs=1e-12)
        assert out[1] == -1.0

    def test_output_dim(self):
        assert fourier_embed(np.zeros(4), bands=8).shape == (64,)

    def test_component_major_layout(self):
        out = fourier_embed([0.25, 0.75], bands=2)
        # first four entries belong to component 0: bands 0 and 1
        assert out[0] == pytest.approx(math.sin(math.pi * 0.25))
        assert out[1] == pytest.approx(math.cos(math.pi * 0.25))
        assert out[2] == pytest.approx(math.sin(2 * math.pi * 0.25))
        assert out[4] == pytest.approx(math.sin(math.pi * 0.75))


class TestEncodeCondition:
    def test_null_blend_ignores_value(self):
        rng = rng_for(1)
        mlp = PARAMS.mlps["op_s"]
        null = PARAMS.nulls["op_s"]
        base = encode_condition([0.0], False, mlp, null, PARAMS.bands)
        for _ in range(100):
            c = rng.normal(size=1) * 10
            np.testing.assert_array_equal(
                encode_condition(c, False, mlp, null, PARAMS.bands), base)

    def test_present_condition_is_pure_mlp_of_fourier(self):
        mlp = PARAMS.mlps["op_s"]
        null = PARAMS.nulls["op_s"]
        got = encode_condition([1.5], True, mlp, null, PARAMS.bands)
        want = mlp.apply(fourier_embed([1.5], PARAMS.bands))
        np.testing.assert_array_equal(got, want)

    def test_deterministic(self):
        a = encode_slot(PARAMS, "src_centroid", (0.2, 0.8), True)
        b = encode_slot(PARAMS, "src_centroid", (0.2, 0.8), True)
        np.testing.assert_array_equal(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            encode_condition([0.1, 0.2], True, PARAMS.mlps["op_s"],
                             PARAMS.nulls["op_s"], PARAMS.bands)


class TestTokenAssembly:
    def test_empty_history_yields_single_null_token(self):
        block = assemble_operation_tokens([], PARAMS, (256, 256), "real")
        assert block.dims == (1, 1, 7 * PARAMS.embed_dim)
        for name, k in CONDITION_SLOTS:
            want = encode_slot(PARAMS, name, np.zeros(k), False)
            np.testing.assert_array_equal(block.layout.slice(block, 0, name)[0], want)

    def test_three_rounds_give_four_tokens(self):
        records = [record(round_index=i) for i in range(3)]
        block = assemble_operation_tokens(records, PARAMS, (256, 256), "real")
        assert block.dims == (1, 4, 7 * PARAMS.embed_dim)

    def test_translation_round_has_null_other_op_slots(self):
        block = assemble_operation_tokens([record(kind="T")], PARAMS, (256, 256), "real")
        for name, k in CONDITION_SLOTS:
            if name in ("src_centroid", "src_bbox", "op_t"):
                continue
            default = {"op_s": (1.0,)}.get(name, (0.0,))
            null_vec = encode_slot(PARAMS, name, default, False)
            np.testing.assert_array_equal(block.layout.slice(block, 1, name)[0], null_vec)

    def test_layout_slices_recover_components(self):
        rec = record(kind="S", value=1.7)
        block = assemble_operation_tokens([rec], PARAMS, (256, 256), "real")
        want_src = encode_slot(PARAMS, "src_centroid", rec.source_centroid, True)
        want_s = encode_slot(PARAMS, "op_s", (1.7,), True)
        np.testing.assert_array_equal(block.layout.slice(block, 1, "src_centroid")[0],
                                      want_src)
        np.testing.assert_array_equal(block.layout.slice(block, 1, "op_s")[0], want_s)

    def test_translation_normalized_by_canvas(self):
        rec = record(kind="T", value=(128.0, 64.0, 19.0))
        block = assemble_operation_tokens([rec], PARAMS, (256, 128), "real")
        want = encode_slot(PARAMS, "op_t", (0.5, 0.5, 0.1), True)
        np.testing.assert_array_equal(block.layout.slice(block, 1, "op_t")[0], want)

    def test_all_outputs_finite(self):
        records = [record(kind=k, value=v, round_index=i) for i, (k, v) in enumerate(
            [("T", (10.0, 2.0, 1.0)), ("S", 0.5)])]
        block = assemble_operation_tokens(records, PARAMS, (64, 64), "real")
        assert np.isfinite(block.data).all()


def _obs(h=16, w=16, fill=128):
    img = np.full((h, w, 4), fill, np.uint8)
    return Observation(image=img, annotations={})


class TestFrameInput:
    def test_single_rgba_frame_plus_mask_is_five_channels(self):
        stack = assemble_frame_input([_obs()], np.zeros((16, 16), np.uint8))
        assert stack.shape == (5, 16, 16)

    def test_omitted_mask_channel_is_zero(self):
        stack = assemble_frame_input([_obs(), _obs(fill=4)], np.zeros((16, 16), np.uint8))
        np.testing.assert_array_equal(stack[-1], 0.0)

    def test_channel_order_round_major(self):
        a, b = _obs(fill=10), _obs(fill=250)
        stack = assemble_frame_input([a, b], np.ones((16, 16), np.uint8))
        np.testing.assert_allclose(stack[0], 10 / 255.0)
        np.testing.assert_allclose(stack[4], 250 / 255.0)
        np.testing.assert_array_equal(stack[-1], 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            assemble_frame_input([_obs(16, 16), _obs(8, 8)], np.zeros((16, 16)))
        with pytest.raises(ShapeMismatch):
            assemble_frame_input([_obs(16, 16)], np.zeros((8, 8)))


def identity_encoder(in_hw=(16, 16), out_hw=(4, 4)):
    """Identity-like weights: delta stem, averaging downsamplers (so every
    pixel reaches the output), zero residual branches, unit 1x1 projection."""
    def delta(k=3, stride=1):
        w = np.zeros((1, 1, k, k))
        w[0, 0, k // 2, k // 2] = 1.0
        return Conv2dParams(weight=w, bias=np.zeros(1), stride=stride)

    def avg(k=3, stride=2):
        w = np.full((1, 1, k, k), 1.0 / (k * k))
        return Conv2dParams(weight=w, bias=np.zeros(1), stride=stride)

    def zero(k=3):
        return Conv2dParams(weight=np.zeros((1, 1, k, k)), bias=np.zeros(1))

    n_stages = int(round(np.log2(in_hw[0] / out_hw[0])))
    stages = tuple((avg(), ResBlockParams(zero(), zero())) for _ in range(n_stages))
    proj = Conv2dParams(weight=np.ones((1, 1, 1, 1)), bias=np.zeros(1))
    return FrameEncoderParams(in_channels=1, out_channels=1, in_hw=in_hw,
                              out_hw=out_hw, stem=delta(), stages=stages, proj=proj)


class TestFrameEncoder:
    def test_fresh_encoder_outputs_exact_zero(self):
        params = FrameEncoderParams.create(5, 8, (32, 32), (8, 8), seed=3)
        rng = rng_for(4)
        out = frame_encode(rng.normal(size=(5, 32, 32)), params)
        np.testing.assert_array_equal(out, 0.0)

    def test_output_dims_match_declaration(self):
        params = FrameEncoderParams.create(3, 6, (64, 64), (16, 16), seed=5)
        out = frame_encode(np.zeros((3, 64, 64)), params)
        assert out.shape == (6, 16, 16)

    def test_receptive_field_locality(self):
        params = identity_encoder()
        rng = rng_for(6)
        x = rng.normal(size=(1, 16, 16))
        base = frame_encode(x, params)
        for y, xx in ((2, 2), (13, 12), (8, 3)):
            perturbed = x.copy()
            perturbed[0, y, xx] += 5.0
            diff = np.abs(frame_encode(perturbed, params) - base)[0]
            changed = np.argwhere(diff > 0)
            assert changed.size > 0
            # with 3x3 kernels and two stride-2 stages, influence stays within
            # +-2 output cells of the source pixel's cell
            cy, cx = y // 4, xx // 4
            assert np.all(np.abs(changed[:, 0] - cy) <= 2)
            assert np.all(np.abs(changed[:, 1] - cx) <= 2)

    def test_bad_output_dims_rejected(self):
        with pytest.raises(ShapeMismatch):
            FrameEncoderParams.create(3, 4, (32, 32), (12, 12))

    def test_bad_input_shape_rejected(self):
        params = FrameEncoderParams.create(3, 4, (32, 32), (8, 8))
        with pytest.raises(ShapeMismatch):
            frame_encode(np.zeros((3, 16, 16)), params)


class TestWeightsRoundTrip:
    def test_encoder_params_survive_container(self, tmp_path):
        from scenedit.weights import load_arrays, save_arrays

        path = tmp_path / "encoder.bin"
        save_arrays(path, PARAMS.to_named_arrays())
        again = EncoderParams.from_named_arrays(load_arrays(path))
        assert again.embed_dim == PARAMS.embed_dim
        # f32 storage: compare at float32 resolution
        got = encode_slot(again, "op_s", (1.5,), True)
        want = encode_slot(PARAMS, "op_s", (1.5,), True)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-5)
