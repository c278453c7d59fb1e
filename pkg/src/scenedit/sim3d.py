"""Synthetic-domain simulation: ground placement, bottom-anchored scaling,
object-axis rotations, AABB collision rejection and frustum visibility,
plus renderer-agnostic scene scripts and a proxy z-buffer render for tests.

World frame is right-handed with y up.  An object's local origin sits at its
bottom center; the box spans [-w/2, w/2] x [0, h] x [-d/2, d/2] before the
instance scale.  After X/Z rotations the state is re-grounded by shifting
the instance so its world AABB rests on y = 0 again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .assets import KIND_BOX3D, AssetStore, ObjectAsset
from .errors import (
    BoundViolation,
    CollisionViolation,
    FrustumViolation,
    IllegalCommand,
    InconsistentSequence,
    PlacementExhausted,
)
from .scene import (
    SCALE_MAX,
    SCALE_MIN,
    CameraParams,
    InstanceAnnotation,
    ObjectInstance,
    Observation,
    OperationCommand,
    SceneState,
)

GROUND_EXTENT = 10.0  # side length of the ground patch framed by the default camera
ANGLE_STEP_BOUNDS = {"X": 50.0, "Y": 45.0, "Z": 60.0}  # per-step, degrees
GROUND_EPS = 1e-9

DEFAULT_CAMERA = CameraParams(position=(0.0, 9.0, 13.5), look_at=(0.0, 0.0, 0.0),
                              fov_y_deg=50.0, near=0.1, far=100.0)

BACKGROUND_RGBA = (208, 214, 221, 255)
PALETTE = (
    (203, 67, 53), (36, 113, 163), (40, 180, 99), (212, 172, 13),
    (136, 78, 160), (211, 84, 0), (23, 165, 137), (100, 30, 22),
)
LIGHT_DIR = np.array([-0.45, 0.80, 0.40])
LIGHT_DIR = LIGHT_DIR / np.linalg.norm(LIGHT_DIR)


@dataclass(frozen=True)
class Aabb3:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise BoundViolation(f"inverted AABB {self.lo} > {self.hi}")

    def overlaps(self, other: "Aabb3") -> bool:
        """Strict interior overlap; exact face contact is legal."""
        return all(self.lo[i] < other.hi[i] and self.hi[i] > other.lo[i]
                   for i in range(3))


def rotation_matrix(rx_deg: float, ry_deg: float, rz_deg: float) -> np.ndarray:
    """Intrinsic X -> Y -> Z rotation, i.e. R = Rx @ Ry @ Rz on column vectors."""
    ax, ay, az = (math.radians(a) for a in (rx_deg, ry_deg, rz_deg))
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rx @ ry @ rz


def local_corners(asset: ObjectAsset, scale: float) -> np.ndarray:
    """The 8 corners of the scaled box in object space (origin at bottom
    center)."""
    w, h, d = (e * scale for e in asset.extent)
    xs = (-w / 2, w / 2)
    ys = (0.0, h)
    zs = (-d / 2, d / 2)
    return np.array([(x, y, z) for x in xs for y in ys for z in zs])


def world_corners(inst: ObjectInstance, asset: ObjectAsset) -> np.ndarray:
    rot = rotation_matrix(*inst.rotation_deg)
    return (rot @ local_corners(asset, inst.scale_factor).T).T + np.asarray(inst.position)


def instance_aabb(inst: ObjectInstance, asset: ObjectAsset) -> Aabb3:
    corners = world_corners(inst, asset)
    return Aabb3(tuple(corners.min(axis=0)), tuple(corners.max(axis=0)))


def reground(inst: ObjectInstance, asset: ObjectAsset) -> ObjectInstance:
    """Shift the instance vertically so its AABB rests exactly on y = 0."""
    rot = rotation_matrix(*inst.rotation_deg)
    rel = (rot @ local_corners(asset, inst.scale_factor).T).T
    min_rel_y = float(rel[:, 1].min())
    pos = inst.position
    return replace(inst, position=(pos[0], -min_rel_y, pos[2]))


# -- camera -------------------------------------------------------------------

def camera_basis(camera: CameraParams):
    eye = np.asarray(camera.position, float)
    forward = np.asarray(camera.look_at, float) - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)
    return eye, right, up, forward


def project_points(points: np.ndarray, camera: CameraParams,
                   canvas: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Project world points to pixel coordinates.  Returns (pixels (N, 2),
    view depth (N,)); depth is the distance along the camera forward axis."""
    eye, right, up, forward = camera_basis(camera)
    width, height = canvas
    rel = np.atleast_2d(points) - eye
    x_v = rel @ right
    y_v = rel @ up
    depth = rel @ forward
    fy = 1.0 / math.tan(math.radians(camera.fov_y_deg) / 2.0)
    aspect = width / height
    with np.errstate(divide="ignore", invalid="ignore"):
        x_ndc = (fy / aspect) * x_v / depth
        y_ndc = fy * y_v / depth
    px = np.stack([(x_ndc + 1.0) / 2.0 * width, (1.0 - y_ndc) / 2.0 * height], axis=-1)
    return px, depth


def aabb_in_frustum(aabb: Aabb3, camera: CameraParams, canvas: tuple[int, int]) -> bool:
    """True iff all 8 AABB corners project inside the image rectangle and lie
    strictly between the near and far planes."""
    xs = (aabb.lo[0], aabb.hi[0])
    ys = (aabb.lo[1], aabb.hi[1])
    zs = (aabb.lo[2], aabb.hi[2])
    corners = np.array([(x, y, z) for x in xs for y in ys for z in zs])
    px, depth = project_points(corners, camera, canvas)
    if np.any(depth <= camera.near) or np.any(depth >= camera.far):
        return False
    width, height = canvas
    return bool(np.all(px[:, 0] >= 0) and np.all(px[:, 0] <= width)
                and np.all(px[:, 1] >= 0) and np.all(px[:, 1] <= height))


def check_frustum(state: SceneState, store: AssetStore) -> dict[str, bool]:
    camera = state.camera or DEFAULT_CAMERA
    return {
        inst.instance_id: aabb_in_frustum(instance_aabb(inst, store.get(inst.asset_id)),
                                          camera, state.canvas)
        for inst in state.objects
    }


def projected_bbox_px(state: SceneState, inst: ObjectInstance,
                      store: AssetStore) -> tuple[float, float, float, float]:
    """Tight pixel box of the projected oriented box (convex, so the corner
    projections bound it exactly)."""
    corners = world_corners(inst, store.get(inst.asset_id))
    px, _ = project_points(corners, state.camera or DEFAULT_CAMERA, state.canvas)
    return (float(px[:, 0].min()), float(px[:, 1].min()),
            float(px[:, 0].max()), float(px[:, 1].max()))


# -- placement & transitions ----------------------------------------------------

def _collision_free(candidate: Aabb3, others: list[Aabb3]) -> bool:
    return not any(candidate.overlaps(o) for o in others)


def place_objects(background_id: str, asset_ids: list[str], store: AssetStore,
                  canvas: tuple[int, int], rng: np.random.Generator,
                  camera: CameraParams = DEFAULT_CAMERA,
                  scale_range: tuple[float, float] = (0.5, 2.0),
                  max_attempts: int = 256, rng_seed: int = 0,
                  preplaced: tuple[ObjectInstance, ...] = ()) -> SceneState:
    """Ground every object (AABB min-y = 0), pairwise disjoint, fully inside
    the view frustum; deterministic for a given rng state."""
    if not asset_ids and not preplaced:
        raise IllegalCommand("cannot place an empty object set")
    instances: list[ObjectInstance] = list(preplaced)
    boxes = [instance_aabb(i, store.get(i.asset_id)) for i in instances]
    half = GROUND_EXTENT / 2.0
    for idx, asset_id in enumerate(asset_ids):
        asset = store.get(asset_id)
        if asset.kind != KIND_BOX3D:
            raise IllegalCommand(f"asset {asset_id!r} is not a box3d asset")
        placed = None
        for _ in range(max_attempts):
            scale = float(rng.uniform(*scale_range))
            scale = min(max(scale, SCALE_MIN), SCALE_MAX)
            x = float(rng.uniform(-half, half))
            z = float(rng.uniform(-half, half))
            inst = ObjectInstance(
                instance_id=f"obj{len(instances)}", asset_id=asset_id,
                scale_factor=scale, position=(x, 0.0, z), rotation_deg=(0.0, 0.0, 0.0))
            inst = reground(inst, asset)
            box = instance_aabb(inst, asset)
            if not aabb_in_frustum(box, camera, canvas):
                continue
            if not _collision_free(box, boxes):
                continue
            placed = inst
            boxes.append(box)
            break
        if placed is None:
            raise PlacementExhausted(
                f"no collision-free in-frustum spot for {asset_id!r} "
                f"after {max_attempts} attempts")
        instances.append(placed)
    return SceneState(domain="syn", background_id=background_id, canvas=canvas,
                      objects=tuple(instances), camera=camera, rng_seed=rng_seed)


def apply_operation_3d(state: SceneState, cmd: OperationCommand,
                       store: AssetStore) -> SceneState:
    """Synthetic-domain transition.  T moves along the ground plane, S scales
    about the bottom anchor, X/Y/Z add an object-axis rotation step; the
    result must stay collision-free and inside the frustum."""
    inst = state.find(cmd.target_instance_id)
    asset = store.get(inst.asset_id)
    camera = state.camera or DEFAULT_CAMERA

    if cmd.kind == "T":
        value = cmd.value
        if not isinstance(value, (tuple, list)) or len(value) != 2:
            raise IllegalCommand(f"synthetic translation needs (dx, dz), got {value!r}")
        dx, dz = (float(v) for v in value)
        pos = inst.position
        new_inst = replace(inst, position=(pos[0] + dx, pos[1], pos[2] + dz))
    elif cmd.kind == "S":
        if isinstance(cmd.value, (tuple, list)):
            raise IllegalCommand(f"scale needs a scalar multiplier, got {cmd.value!r}")
        mult = float(cmd.value)
        if mult <= 0:
            raise BoundViolation(f"scale multiplier {mult} must be positive")
        ns = inst.scale_factor * mult
        if not (SCALE_MIN <= ns <= SCALE_MAX):
            raise BoundViolation(f"scale factor {ns} outside [{SCALE_MIN}, {SCALE_MAX}]")
        new_inst = reground(replace(inst, scale_factor=ns), asset)
    elif cmd.kind in ("X", "Y", "Z"):
        if isinstance(cmd.value, (tuple, list)):
            raise IllegalCommand(f"rotation needs a scalar angle, got {cmd.value!r}")
        angle = float(cmd.value)
        bound = ANGLE_STEP_BOUNDS[cmd.kind]
        if not (-bound <= angle <= bound):
            raise BoundViolation(
                f"{cmd.kind} rotation step {angle} outside [-{bound}, {bound}]")
        axis = "XYZ".index(cmd.kind)
        rot = list(inst.rotation_deg)
        rot[axis] += angle
        new_inst = reground(replace(inst, rotation_deg=tuple(rot)), asset)
    else:
        raise IllegalCommand(f"unknown operation kind {cmd.kind!r}")

    new_box = instance_aabb(new_inst, asset)
    others = [instance_aabb(o, store.get(o.asset_id))
              for o in state.objects if o.instance_id != inst.instance_id]
    if not _collision_free(new_box, others):
        raise CollisionViolation(
            f"{cmd.kind} on {inst.instance_id} collides with another object")
    if not aabb_in_frustum(new_box, camera, state.canvas):
        raise FrustumViolation(f"{cmd.kind} on {inst.instance_id} leaves the view frustum")
    next_state = state.with_object(new_inst)
    return replace(next_state, round_index=state.round_index + 1)


# -- scene scripts ----------------------------------------------------------------

def _transform_json(inst: ObjectInstance) -> dict:
    return {"pos": list(inst.position), "rot_deg": list(inst.rotation_deg),
            "scale": inst.scale_factor}


def emit_scene_script(states: list[SceneState], commands: list[OperationCommand],
                      store: AssetStore) -> dict:
    """Serialize a simulated sequence as a renderer-agnostic script.  Round 0
    lists every initial transform; each later round records the command and
    the resulting transform of its target."""
    if len(states) != len(commands) + 1:
        raise InconsistentSequence(
            f"{len(states)} states cannot come from {len(commands)} commands")
    rounds = []
    for inst in states[0].objects:
        rounds.append({"idx": 0, "instance": inst.instance_id, "asset": inst.asset_id,
                       "op": None, "transform": _transform_json(inst)})
    for i, cmd in enumerate(commands):
        try:
            replayed = apply_operation_3d(states[i], cmd, store)
        except Exception as exc:
            raise InconsistentSequence(f"command {i} does not replay: {exc}") from exc
        recorded = states[i + 1].find(cmd.target_instance_id)
        got = replayed.find(cmd.target_instance_id)
        if not _transforms_close(recorded, got):
            raise InconsistentSequence(f"state {i + 1} does not match its command")
        rounds.append({"idx": i + 1, "instance": cmd.target_instance_id,
                       "op": {"kind": cmd.kind, "value": cmd.value_json()},
                       "transform": _transform_json(recorded)})
    camera = states[0].camera or DEFAULT_CAMERA
    return {"schema_version": 1, "background": states[0].background_id,
            "canvas": list(states[0].canvas), "camera": camera.to_json(),
            "rounds": rounds}


def _transforms_close(a: ObjectInstance, b: ObjectInstance, tol: float = 1e-9) -> bool:
    return (np.allclose(a.position, b.position, atol=tol, rtol=0.0)
            and np.allclose(a.rotation_deg, b.rotation_deg, atol=tol, rtol=0.0)
            and abs(a.scale_factor - b.scale_factor) <= tol)


def replay_scene_script(script: dict, store: AssetStore) -> list[SceneState]:
    """Rebuild the state sequence a script encodes, checking each recorded
    transform against the simulator to 1e-9."""
    camera = CameraParams.from_json(script["camera"])
    initial = []
    for entry in script["rounds"]:
        if entry["idx"] != 0:
            continue
        t = entry["transform"]
        initial.append(ObjectInstance(
            instance_id=entry["instance"], asset_id=entry["asset"],
            scale_factor=float(t["scale"]), position=tuple(t["pos"]),
            rotation_deg=tuple(t["rot_deg"])))
    state = SceneState(domain="syn", background_id=script["background"],
                       canvas=tuple(script["canvas"]), objects=tuple(initial),
                       camera=camera)
    states = [state]
    for entry in script["rounds"]:
        if entry["idx"] == 0:
            continue
        op = entry["op"]
        value = tuple(op["value"]) if isinstance(op["value"], list) else float(op["value"])
        cmd = OperationCommand(entry["instance"], op["kind"], value)
        state = apply_operation_3d(state, cmd, store)
        got = state.find(entry["instance"])
        t = entry["transform"]
        want = replace(got, position=tuple(t["pos"]), rotation_deg=tuple(t["rot_deg"]),
                       scale_factor=float(t["scale"]))
        if not _transforms_close(got, want):
            raise InconsistentSequence(f"replay diverged at round {entry['idx']}")
        states.append(state)
    return states


# -- proxy renderer ----------------------------------------------------------------

def _ray_grid(camera: CameraParams, canvas: tuple[int, int]):
    """World-space ray directions through every pixel center, scaled so the
    ray parameter t equals view depth."""
    eye, right, up, forward = camera_basis(camera)
    width, height = canvas
    fy = 1.0 / math.tan(math.radians(camera.fov_y_deg) / 2.0)
    aspect = width / height
    xs = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * aspect / fy
    ys = (1.0 - 2.0 * (np.arange(height) + 0.5) / height) / fy
    dirs = (xs[None, :, None] * right + ys[:, None, None] * up + forward)
    return eye, dirs


def _intersect_box(eye, dirs, inst: ObjectInstance, asset: ObjectAsset):
    """Slab test in object space.  Returns (t_enter, face_axis, face_sign)
    per pixel with t = +inf where the ray misses."""
    rot = rotation_matrix(*inst.rotation_deg)
    inv = rot.T / inst.scale_factor
    o = inv @ (eye - np.asarray(inst.position))
    d = np.einsum("ij,hwj->hwi", inv, dirs)
    w, h, dep = asset.extent
    lo = np.array([-w / 2.0, 0.0, -dep / 2.0])
    hi = np.array([w / 2.0, h, dep / 2.0])

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_d = 1.0 / d
        t_lo = (lo - o) * inv_d
        t_hi = (hi - o) * inv_d
    # rays parallel to a slab: inside -> unconstrained, outside -> miss
    parallel = d == 0.0
    if np.any(parallel):
        inside = (o >= lo) & (o <= hi)
        t_lo = np.where(parallel, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(parallel, np.where(inside, np.inf, -np.inf), t_hi)
    t_near = np.minimum(t_lo, t_hi)
    t_far = np.maximum(t_lo, t_hi)
    enter_axis = np.argmax(t_near, axis=-1)
    t_enter = np.max(t_near, axis=-1)
    t_exit = np.min(t_far, axis=-1)
    hit = (t_enter <= t_exit) & (t_exit > 0.0)
    t = np.where(hit & (t_enter > 0.0), t_enter, np.inf)
    rows = np.arange(t.shape[0])[:, None]
    cols = np.arange(t.shape[1])[None, :]
    sign = np.where(d[rows, cols, enter_axis] > 0.0, -1.0, 1.0)
    return t, enter_axis, sign, rot


def proxy_render(state: SceneState, store: AssetStore) -> Observation:
    """Flat-shaded z-buffer render of the synthetic scene over a solid
    background; used by tests and the session service in place of a
    photoreal renderer."""
    camera = state.camera or DEFAULT_CAMERA
    width, height = state.canvas
    eye, dirs = _ray_grid(camera, state.canvas)

    n = len(state.objects)
    zbuf = np.full((n, height, width), np.inf) if n else np.zeros((0, height, width))
    shade = np.zeros((n, height, width, 3))
    for i, inst in enumerate(state.objects):
        asset = store.get(inst.asset_id)
        t, axis, sign, rot = _intersect_box(eye, dirs, inst, asset)
        zbuf[i] = t
        base = np.array(PALETTE[i % len(PALETTE)], float)
        normals_obj = np.zeros((*t.shape, 3))
        rows = np.arange(t.shape[0])[:, None]
        cols = np.arange(t.shape[1])[None, :]
        normals_obj[rows, cols, axis] = sign
        normals_world = np.einsum("ij,hwj->hwi", rot, normals_obj)
        lambert = np.clip(normals_world @ LIGHT_DIR, 0.0, 1.0)
        shade[i] = base * (0.55 + 0.45 * lambert)[:, :, None]

    image = np.empty((height, width, 4), np.uint8)
    image[:, :] = BACKGROUND_RGBA
    annotations: dict[str, InstanceAnnotation] = {}
    ranked = sorted(range(n), key=lambda i: _view_depth(state.objects[i], store, camera),
                    reverse=True)
    rank_of = {idx: r for r, idx in enumerate(ranked)}
    if n:
        winner = np.argmin(zbuf, axis=0)
        any_hit = np.isfinite(np.min(zbuf, axis=0))
        for i, inst in enumerate(state.objects):
            vis_mask = any_hit & (winner == i)
            image[vis_mask, :3] = np.clip(np.rint(shade[i][vis_mask]), 0, 255).astype(np.uint8)
            image[vis_mask, 3] = 255
            coverage = int(np.count_nonzero(np.isfinite(zbuf[i])))
            visible = int(np.count_nonzero(vis_mask))
            full = projected_bbox_px(state, inst, store)
            clipped = (max(full[0], 0.0), max(full[1], 0.0),
                       min(full[2], float(width)), min(full[3], float(height)))
            annotations[inst.instance_id] = InstanceAnnotation(
                instance_id=inst.instance_id,
                bbox_px=clipped,
                bbox_px_full=full,
                centroid_px=((full[0] + full[2]) / 2.0, (full[1] + full[3]) / 2.0),
                visible_fraction=(visible / coverage) if coverage else 0.0,
                depth_rank=rank_of[i],
                scale_factor=inst.scale_factor,
            )
    return Observation(image=image, annotations=annotations)


def _view_depth(inst: ObjectInstance, store: AssetStore, camera: CameraParams) -> float:
    aabb = instance_aabb(inst, store.get(inst.asset_id))
    center = np.array([(l + h) / 2.0 for l, h in zip(aabb.lo, aabb.hi)])
    _, depth = project_points(center[None, :], camera, (1, 1))
    return float(depth[0])
