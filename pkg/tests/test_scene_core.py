"""Scene state machine: transitions, source regions, target masks."""

import numpy as np
import pytest

from scenedit.errors import (
    BoundViolation,
    IllegalKindForDomain,
    UnknownInstance,
)
from scenedit.scene import (
    ObjectInstance,
    OperationCommand,
    SceneState,
    apply_operation,
    bbox_coverage_mask,
    derive_source_region,
    derive_target_mask,
    validate_state,
)

from conftest import make_real_state, rng_for


class TestApplyOperation:
    def test_identity_translation_keeps_placement(self, store):
        state = make_real_state()
        nxt = apply_operation(state, OperationCommand("a", "T", (0.0, 0.0, 0.0)), store)
        assert nxt.find("a").center_px == state.find("a").center_px
        assert nxt.find("a").depth == state.find("a").depth
        assert nxt.round_index == state.round_index + 1

    def test_input_state_is_not_mutated(self, store):
        state = make_real_state()
        before = state.find("a").center_px
        apply_operation(state, OperationCommand("a", "T", (5.0, -3.0, 2.0)), store)
        assert state.find("a").center_px == before
        assert state.round_index == 0

    def test_scale_doubles_factor_only(self, store):
        state = make_real_state()
        nxt = apply_operation(state, OperationCommand("a", "S", 2.0), store)
        assert nxt.find("a").scale_factor == 2.0
        assert nxt.find("a").center_px == state.find("a").center_px
        assert nxt.find("a").depth == state.find("a").depth

    def test_scale_past_upper_bound_rejected(self, store):
        state = make_real_state()
        with pytest.raises(BoundViolation):
            apply_operation(state, OperationCommand("a", "S", 5.0), store)

    def test_depth_bound_rejected(self, store):
        state = make_real_state()
        with pytest.raises(BoundViolation):
            apply_operation(state, OperationCommand("a", "T", (0.0, 0.0, 60.0)), store)

    def test_center_must_stay_on_canvas(self, store):
        state = make_real_state()
        with pytest.raises(BoundViolation):
            apply_operation(state, OperationCommand("a", "T", (150.0, 0.0, 0.0)), store)

    def test_unknown_instance(self, store):
        state = make_real_state()
        with pytest.raises(UnknownInstance):
            apply_operation(state, OperationCommand("zz", "T", (0.0, 0.0, 0.0)), store)

    def test_rotation_illegal_in_real_domain(self, store):
        state = make_real_state()
        with pytest.raises(IllegalKindForDomain):
            apply_operation(state, OperationCommand("a", "X", 10.0), store)

    def test_inverse_translation_round_trips(self, store):
        state = make_real_state()
        fwd = OperationCommand("a", "T", (17.25, -9.5, 12.125))
        bwd = OperationCommand("a", "T", (-17.25, 9.5, -12.125))
        back = apply_operation(apply_operation(state, fwd, store), bwd, store)
        np.testing.assert_allclose(back.find("a").center_px,
                                   state.find("a").center_px, atol=1e-9)
        assert abs(back.find("a").depth - state.find("a").depth) <= 1e-9

    def test_fuzz_random_legal_sequences_stay_valid(self, store):
        # 10k legal commands across many restarts never leave a violating state
        rng = rng_for(99)
        total = 0
        while total < 10_000:
            state = make_real_state(canvas=(200, 200), objects=(
                ObjectInstance("a", "ball-red", 1.0, center_px=(100.0, 100.0), depth=100.0),
                ObjectInstance("b", "gem-green", 1.0, center_px=(60.0, 130.0), depth=40.0),
            ))
            for _ in range(200):
                target = "a" if rng.integers(2) else "b"
                if rng.integers(2):
                    cmd = OperationCommand(target, "T", tuple(
                        rng.uniform(-40, 40, size=3)))
                else:
                    cmd = OperationCommand(target, "S", float(np.exp(rng.uniform(-0.4, 0.4))))
                try:
                    state = apply_operation(state, cmd, store)
                except BoundViolation:
                    continue
                total += 1
                validate_state(state, store)
                if total >= 10_000:
                    break


class TestSourceRegion:
    def test_exact_square_footprint(self, store):
        # a gem-green diamond has a square alpha footprint we can place exactly:
        # solid pixels for |x-c|+|y-c| <= 0.9c with c=(96-1)/2, resized 96->64
        state = make_real_state(canvas=(512, 512), objects=(
            ObjectInstance("sq", "gem-green", 1.0, center_px=(192.0, 192.0), depth=105.0),),
        )
        centroid, bbox = derive_source_region(state, "sq", store)
        assert bbox[0] <= centroid[0] <= bbox[2]
        assert bbox[1] <= centroid[1] <= bbox[3]
        # centroid equals the bbox center by construction
        assert centroid == ((bbox[0] + bbox[2]) / 2, (bbox[1] + bbox[3]) / 2)

    def test_symmetric_layer_centered_gives_center_centroid(self, store):
        state = make_real_state(canvas=(256, 256), objects=(
            ObjectInstance("c", "ball-red", 1.0, center_px=(128.0, 128.0), depth=100.0),),
        )
        centroid, _ = derive_source_region(state, "c", store)
        np.testing.assert_allclose(centroid, (0.5, 0.5), atol=1.0 / 256)

    def test_half_off_left_edge_has_negative_u0(self, store):
        state = make_real_state(canvas=(256, 256), objects=(
            ObjectInstance("e", "ball-red", 1.0, center_px=(0.0, 128.0), depth=60.0),),
        )
        _, bbox = derive_source_region(state, "e", store)
        assert bbox[0] < 0.0
        assert bbox[0] <= bbox[2] and bbox[1] <= bbox[3]

    def test_normalized_box_well_ordered_randomly(self, store):
        rng = rng_for(3)
        for _ in range(50):
            state = make_real_state(canvas=(256, 256), objects=(
                ObjectInstance("r", "ball-blue", float(np.exp(rng.uniform(-0.5, 0.5))),
                               center_px=(float(rng.uniform(0, 256)),
                                          float(rng.uniform(0, 256))),
                               depth=float(rng.uniform(10, 200))),))
            centroid, bbox = derive_source_region(state, "r", store)
            assert bbox[0] <= bbox[2] and bbox[1] <= bbox[3]
            assert bbox[0] <= centroid[0] <= bbox[2]
            assert bbox[1] <= centroid[1] <= bbox[3]

    def test_unknown_instance(self, store):
        with pytest.raises(UnknownInstance):
            derive_source_region(make_real_state(), "nope", store)


class TestTargetMask:
    def test_full_canvas_bbox_is_all_ones(self, store):
        state = make_real_state()
        mask = bbox_coverage_mask((0.0, 0.0, 1.0, 1.0), (8, 8))
        assert mask.all()
        # derive_target_mask with omission is all-zero regardless of the state
        zero = derive_target_mask(state, "a", (8, 8), store, omit=True)
        assert not zero.any()

    def test_quarter_box_on_4x4_grid(self):
        # cell centers at 0.125, 0.375, 0.625, 0.875: only (1, 1) lies in
        # [0.25, 0.5]^2 (frozen from enumerating all 16 centers)
        mask = bbox_coverage_mask((0.25, 0.25, 0.5, 0.5), (4, 4))
        expected = np.zeros((4, 4), np.uint8)
        expected[1, 1] = 1
        np.testing.assert_array_equal(mask, expected)

    def test_mask_matches_per_cell_oracle_randomly(self):
        rng = rng_for(11)
        for _ in range(1000):
            h, w = int(rng.integers(1, 12)), int(rng.integers(1, 12))
            pts = np.sort(rng.uniform(-0.3, 1.3, size=2))
            pts_v = np.sort(rng.uniform(-0.3, 1.3, size=2))
            bbox = (pts[0], pts_v[0], pts[1], pts_v[1])
            mask = bbox_coverage_mask(bbox, (h, w))
            count = 0
            for i in range(h):
                for j in range(w):
                    cx, cy = (j + 0.5) / w, (i + 0.5) / h
                    inside = bbox[0] <= cx <= bbox[2] and bbox[1] <= cy <= bbox[3]
                    count += inside
                    assert mask[i, j] == (1 if inside else 0)
            assert int(mask.sum()) == count

    def test_unknown_instance(self, store):
        with pytest.raises(UnknownInstance):
            derive_target_mask(make_real_state(), "nope", (4, 4), store)


class TestJsonRoundTrip:
    def test_state_round_trips(self, store):
        state = make_real_state()
        again = SceneState.from_json(state.to_json())
        assert again == state

    def test_command_round_trips(self):
        for cmd in (OperationCommand("a", "T", (1.0, 2.0, 3.0)),
                    OperationCommand("a", "S", 1.5),
                    OperationCommand("b", "Y", -30.0)):
            assert OperationCommand.from_json(cmd.to_json()) == cmd


class TestDegenerateFootprint:
    def test_opaque_corner_lost_in_downscale_is_flagged(self, store):
        # a 64px layer opaque only at one corner pixel: downscaled to 3x3 the
        # bilinear taps all miss it, so nothing opaque survives
        import numpy as np

        from scenedit.assets import AssetStore, ObjectAsset
        from scenedit.errors import DegenerateFootprint
        from scenedit.render2d import rasterize_layer
        from scenedit.scene import instance_footprint_px

        layer = np.zeros((64, 64, 4), np.uint8)
        layer[0, 0] = (255, 0, 0, 255)
        corner = ObjectAsset("corner", "layer2d", (), layer=layer)
        local = AssetStore([corner, store.get("bg-studio")])
        state = SceneState(domain="real", background_id="bg-studio", canvas=(64, 64),
                           objects=(ObjectInstance("c", "corner", 1.0,
                                                   center_px=(32.0, 32.0), depth=200.0),))
        placed = rasterize_layer(corner, state.objects[0], state.canvas)
        assert placed.degenerate
        with pytest.raises(DegenerateFootprint):
            instance_footprint_px(state, "c", local)


class TestSourceRegionExactAnchor:
    def test_quarter_canvas_square_has_expected_region(self, store):
        # a fully opaque 64px square at depth 10 sizes to exactly 128px on a
        # 512 canvas; centered at (192, 192) it occupies pixels [128, 256)^2,
        # i.e. the continuous box (0.25, 0.25, 0.5, 0.5) with center
        # (0.375, 0.375)
        import numpy as np

        from scenedit.assets import AssetStore, ObjectAsset

        layer = np.full((64, 64, 4), (120, 60, 30, 255), np.uint8)
        solid = ObjectAsset("solid64", "layer2d", (), layer=layer)
        local = AssetStore([solid, store.get("bg-studio")])
        state = SceneState(domain="real", background_id="bg-studio",
                           canvas=(512, 512), objects=(
                ObjectInstance("sq", "solid64", 1.0, center_px=(192.0, 192.0),
                               depth=10.0),))
        centroid, bbox = derive_source_region(state, "sq", local)
        np.testing.assert_allclose(bbox, (0.25, 0.25, 0.5, 0.5), atol=1e-12)
        np.testing.assert_allclose(centroid, (0.375, 0.375), atol=1e-12)
