"""Synthetic-domain planner: grounding, collisions, frustum checks, scene
scripts and the proxy z-buffer renderer."""

import math

import numpy as np
import pytest

from scenedit import sim3d
from scenedit.errors import (
    BoundViolation,
    CollisionViolation,
    FrustumViolation,
    InconsistentSequence,
    PlacementExhausted,
)
from scenedit.scene import CameraParams, ObjectInstance, OperationCommand, SceneState

from conftest import rng_for


def grounded_box(instance_id, asset_id, x, z, scale=1.0, rot=(0.0, 0.0, 0.0)):
    return ObjectInstance(instance_id=instance_id, asset_id=asset_id,
                          scale_factor=scale, position=(x, 0.0, z),
                          rotation_deg=rot)


def syn_state(store, objects, canvas=(128, 128)):
    insts = tuple(sim3d.reground(o, store.get(o.asset_id)) for o in objects)
    return SceneState(domain="syn", background_id="backdrop", canvas=canvas,
                      objects=insts, camera=sim3d.DEFAULT_CAMERA)


class TestPlacement:
    def test_single_box_grounded_exactly(self, store):
        rng = rng_for(2)
        state = sim3d.place_objects("backdrop", ["crate"], store, (128, 128), rng)
        aabb = sim3d.instance_aabb(state.objects[0], store.get("crate"))
        assert aabb.lo[1] == pytest.approx(0.0, abs=1e-12)

    def test_two_boxes_disjoint(self, store):
        rng = rng_for(3)
        state = sim3d.place_objects("backdrop", ["crate", "crate"], store, (128, 128), rng)
        a, b = (sim3d.instance_aabb(o, store.get(o.asset_id)) for o in state.objects)
        assert not a.overlaps(b)

    def test_overfull_scene_exhausts(self, store):
        rng = rng_for(4)
        with pytest.raises(PlacementExhausted):
            sim3d.place_objects("backdrop", ["slab"] * 50, store, (128, 128), rng,
                                scale_range=(3.0, 4.0), max_attempts=32)

    def test_everything_in_frustum(self, store):
        rng = rng_for(5)
        state = sim3d.place_objects("backdrop", ["crate", "tower", "pillar"],
                                    store, (128, 128), rng)
        assert all(sim3d.check_frustum(state, store).values())

    def test_deterministic_given_seed(self, store):
        s1 = sim3d.place_objects("backdrop", ["crate", "tower"], store, (128, 128),
                                 rng_for(42))
        s2 = sim3d.place_objects("backdrop", ["crate", "tower"], store, (128, 128),
                                 rng_for(42))
        assert s1.objects == s2.objects


class TestOperations:
    def test_scale_doubles_height_bottom_anchored(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        nxt = sim3d.apply_operation_3d(state, OperationCommand("a", "S", 2.0), store)
        aabb = sim3d.instance_aabb(nxt.find("a"), store.get("crate"))
        assert aabb.hi[1] == pytest.approx(2.0, abs=1e-12)
        assert aabb.lo[1] == pytest.approx(0.0, abs=1e-12)
        # footprint center unchanged
        assert (aabb.lo[0] + aabb.hi[0]) / 2 == pytest.approx(0.0, abs=1e-12)
        assert (aabb.lo[2] + aabb.hi[2]) / 2 == pytest.approx(0.0, abs=1e-12)

    def test_zero_rotation_is_identity(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        nxt = sim3d.apply_operation_3d(state, OperationCommand("a", "Z", 0.0), store)
        assert nxt.find("a").position == state.find("a").position
        assert nxt.find("a").rotation_deg == state.find("a").rotation_deg

    def test_translation_into_other_box_rejected(self, store):
        # interval-overlap oracle: a unit crate at x=0 moved to x=1.5 overlaps
        # a unit crate at x=2 on (1.5, 2.5) x (1.5, 2.5) strictly
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0),
                                  grounded_box("b", "crate", 2.0, 0.0)])
        with pytest.raises(CollisionViolation):
            sim3d.apply_operation_3d(state, OperationCommand("a", "T", (1.5, 0.0)), store)

    def test_exact_face_contact_is_legal(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0),
                                  grounded_box("b", "crate", 2.0, 0.0)])
        nxt = sim3d.apply_operation_3d(state, OperationCommand("a", "T", (1.0, 0.0)), store)
        assert nxt.find("a").position[0] == pytest.approx(1.0)

    def test_translation_out_of_frustum_rejected(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        with pytest.raises(FrustumViolation):
            sim3d.apply_operation_3d(state, OperationCommand("a", "T", (30.0, 0.0)), store)

    def test_angle_step_bounds(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        for kind, bound in (("X", 50.0), ("Y", 45.0), ("Z", 60.0)):
            with pytest.raises(BoundViolation):
                sim3d.apply_operation_3d(state, OperationCommand("a", kind, bound + 1), store)
            sim3d.apply_operation_3d(state, OperationCommand("a", kind, bound), store)

    def test_rotation_composition_round_trips(self, store):
        state = syn_state(store, [grounded_box("a", "tower", 0.0, 0.0)])
        fwd = sim3d.apply_operation_3d(state, OperationCommand("a", "Y", 30.0), store)
        back = sim3d.apply_operation_3d(fwd, OperationCommand("a", "Y", -30.0), store)
        np.testing.assert_allclose(back.find("a").rotation_deg,
                                   state.find("a").rotation_deg, atol=1e-9)

    def test_x_rotation_regrounds(self, store):
        state = syn_state(store, [grounded_box("a", "slab", 0.0, 0.0)])
        nxt = sim3d.apply_operation_3d(state, OperationCommand("a", "X", 35.0), store)
        aabb = sim3d.instance_aabb(nxt.find("a"), store.get("slab"))
        assert abs(aabb.lo[1]) <= 1e-9

    def test_grounding_preserved_by_random_ops(self, store):
        rng = rng_for(7)
        state = syn_state(store, [grounded_box("a", "crate", -2.0, 0.0),
                                  grounded_box("b", "tower", 2.0, 0.0)])
        kinds = ["T", "S", "X", "Y", "Z"]
        done = 0
        while done < 200:
            target = state.objects[int(rng.integers(2))].instance_id
            kind = kinds[int(rng.integers(5))]
            if kind == "T":
                value = (float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)))
            elif kind == "S":
                value = float(np.exp(rng.uniform(-0.3, 0.3)))
            else:
                value = float(rng.uniform(-40, 40))
            try:
                state = sim3d.apply_operation_3d(
                    state, OperationCommand(target, kind, value), store)
            except (BoundViolation, CollisionViolation, FrustumViolation):
                continue
            done += 1
            for inst in state.objects:
                aabb = sim3d.instance_aabb(inst, store.get(inst.asset_id))
                assert abs(aabb.lo[1]) <= 1e-9


class TestFrustum:
    def test_box_at_lookat_inside(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        assert sim3d.check_frustum(state, store)["a"]

    def test_box_behind_camera_outside(self, store):
        cam = sim3d.DEFAULT_CAMERA
        inst = grounded_box("a", "crate", cam.position[0], cam.position[2] + 3.0)
        state = SceneState(domain="syn", background_id="backdrop", canvas=(128, 128),
                           objects=(inst,), camera=cam)
        assert not sim3d.check_frustum(state, store)["a"]

    def test_edge_straddling_box_outside_by_hand(self, store):
        # hand-projected: axis-aligned camera looking down -z from (0, 1, 5),
        # fov 60, square canvas; a unit crate at x = 3 projects its near-left
        # corner at x_ndc = 2.5 / (sqrt(3)) / ... > 1, so it must fail
        cam = CameraParams(position=(0.0, 1.0, 5.0), look_at=(0.0, 1.0, 0.0),
                           fov_y_deg=60.0, near=0.1, far=50.0)
        inst = grounded_box("a", "crate", 3.0, 0.0)
        state = SceneState(domain="syn", background_id="b", canvas=(100, 100),
                           objects=(inst,), camera=cam)
        fy = 1.0 / math.tan(math.radians(30.0))
        # nearest corner (2.5, y, 0.5): depth 4.5, x_ndc = fy * 2.5 / 4.5 ~ 0.96
        # farthest corner (3.5, y, -0.5): depth 5.5, x_ndc = fy * 3.5 / 5.5 ~ 1.10 > 1
        assert fy * 3.5 / 5.5 > 1.0
        assert not sim3d.check_frustum(state, store)["a"]
        # while the same box at x = 2 fits
        inst2 = grounded_box("a2", "crate", 2.0, 0.0)
        state2 = SceneState(domain="syn", background_id="b", canvas=(100, 100),
                            objects=(inst2,), camera=cam)
        assert fy * 2.5 / 4.5 < 1.0 and fy * 2.5 / 5.5 < 1.0
        assert sim3d.check_frustum(state2, store)["a2"]


class TestSceneScript:
    def test_empty_command_list(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        script = sim3d.emit_scene_script([state], [], store)
        assert [r["idx"] for r in script["rounds"]] == [0]
        assert script["rounds"][0]["op"] is None

    def test_snapshot_count_matches_rounds(self, store):
        rng = rng_for(8)
        state = sim3d.place_objects("backdrop", ["crate", "tower"], store, (96, 96), rng)
        states, commands = [state], []
        while len(commands) < 32:
            kind = ["T", "S", "Y"][int(rng.integers(3))]
            target = state.objects[int(rng.integers(2))].instance_id
            value = ((float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
                     if kind == "T" else float(rng.uniform(-30, 30)) if kind == "Y"
                     else float(np.exp(rng.uniform(-0.2, 0.2))))
            try:
                state = sim3d.apply_operation_3d(
                    state, OperationCommand(target, kind, value), store)
            except (BoundViolation, CollisionViolation, FrustumViolation):
                continue
            states.append(state)
            commands.append(OperationCommand(target, kind, value))
        script = sim3d.emit_scene_script(states, commands, store)
        assert len(script["rounds"]) == len(states[0].objects) + 32

    def test_replay_round_trip(self, store):
        rng = rng_for(9)
        state = sim3d.place_objects("backdrop", ["crate", "pillar"], store, (96, 96), rng)
        states, commands = [state], []
        while len(commands) < 8:
            target = state.objects[int(rng.integers(2))].instance_id
            cmd = OperationCommand(target, "T",
                                   (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))))
            try:
                state = sim3d.apply_operation_3d(state, cmd, store)
            except (CollisionViolation, FrustumViolation):
                continue
            states.append(state)
            commands.append(cmd)
        script = sim3d.emit_scene_script(states, commands, store)
        replayed = sim3d.replay_scene_script(script, store)
        assert len(replayed) == len(states)
        for got, want in zip(replayed, states):
            for gi, wi in zip(got.objects, want.objects):
                np.testing.assert_allclose(gi.position, wi.position, atol=1e-9)
                np.testing.assert_allclose(gi.rotation_deg, wi.rotation_deg, atol=1e-9)

    def test_inconsistent_sequence_detected(self, store):
        state = syn_state(store, [grounded_box("a", "crate", 0.0, 0.0)])
        bogus = state.with_object(grounded_box("a", "crate", 3.0, 3.0))
        with pytest.raises(InconsistentSequence):
            sim3d.emit_scene_script([state, bogus],
                                    [OperationCommand("a", "T", (1.0, 0.0))], store)


def ray_box_oracle(eye, direction, inst, asset):
    """Scalar slab test, written independently from the renderer."""
    rot = sim3d.rotation_matrix(*inst.rotation_deg)
    o = rot.T @ (np.asarray(eye) - np.asarray(inst.position)) / inst.scale_factor
    d = rot.T @ np.asarray(direction) / inst.scale_factor
    w, h, dep = asset.extent
    bounds = [(-w / 2, w / 2), (0.0, h), (-dep / 2, dep / 2)]
    t0, t1 = -np.inf, np.inf
    for axis in range(3):
        lo, hi = bounds[axis]
        if d[axis] == 0.0:
            if not (lo <= o[axis] <= hi):
                return np.inf
            continue
        ta = (lo - o[axis]) / d[axis]
        tb = (hi - o[axis]) / d[axis]
        ta, tb = min(ta, tb), max(ta, tb)
        t0, t1 = max(t0, ta), min(t1, tb)
    if t0 > t1 or t1 <= 0.0 or t0 <= 0.0:
        return np.inf
    return t0


class TestProxyRender:
    def test_empty_scene_is_background(self, store):
        state = SceneState(domain="syn", background_id="backdrop", canvas=(32, 24),
                           objects=(), camera=sim3d.DEFAULT_CAMERA)
        obs = sim3d.proxy_render(state, store)
        assert (obs.image == np.array(sim3d.BACKGROUND_RGBA, np.uint8)).all()

    def test_render_deterministic(self, store):
        state = syn_state(store, [grounded_box("a", "crate", -1.0, 0.0),
                                  grounded_box("b", "tower", 1.5, 1.0)], canvas=(64, 48))
        a = sim3d.proxy_render(state, store).image
        b = sim3d.proxy_render(state, store).image
        np.testing.assert_array_equal(a, b)

    def test_occlusion_matches_per_pixel_depth_oracle(self, store):
        state = syn_state(store, [grounded_box("far", "crate", 0.0, -2.0),
                                  grounded_box("near", "crate", 0.3, 2.0)],
                          canvas=(40, 30))
        obs = sim3d.proxy_render(state, store)
        eye, dirs = sim3d._ray_grid(state.camera, state.canvas)
        for y in range(0, 30, 3):
            for x in range(0, 40, 3):
                ts = [ray_box_oracle(eye, dirs[y, x], inst, store.get(inst.asset_id))
                      for inst in state.objects]
                if all(np.isinf(t) for t in ts):
                    assert tuple(obs.image[y, x]) == sim3d.BACKGROUND_RGBA
                else:
                    winner = int(np.argmin(ts))
                    # winner color belongs to that instance's palette entry
                    base = np.array(sim3d.PALETTE[winner], float)
                    pixel = obs.image[y, x, :3].astype(float)
                    lo, hi = 0.55 * base - 1, base + 1
                    assert np.all(pixel >= lo) and np.all(pixel <= hi)

    def test_nearer_box_occludes_farther(self, store):
        # a tall near box on the line of sight partially hides the far crate
        state = syn_state(store, [grounded_box("far", "crate", 0.0, -1.0, scale=1.2),
                                  grounded_box("near", "tower", 0.4, 1.5, scale=1.5)],
                          canvas=(60, 45))
        obs = sim3d.proxy_render(state, store)
        ann_far = obs.annotations["far"]
        ann_near = obs.annotations["near"]
        assert ann_near.visible_fraction == 1.0
        assert 0.0 < ann_far.visible_fraction < 1.0
        assert ann_far.depth_rank == 0 and ann_near.depth_rank == 1
