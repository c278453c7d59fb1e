"""Scene state space, operation space and domain-independent derivations.

States are immutable values; every transition returns a fresh state and
re-validates the touched instance, so a fixed (state, command) pair always
maps to the same next state.  Domain-specific transition rules live in
`render2d` (realistic compositing domain) and `sim3d` (synthetic planning
domain); this module owns the shared types and dispatches to them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .assets import KIND_LAYER2D, AssetStore
from .errors import (
    BoundViolation,
    IllegalCommand,
    IllegalKindForDomain,
    UnknownInstance,
)

DOMAIN_REAL = "real"
DOMAIN_SYN = "syn"

OP_KINDS = ("T", "S", "X", "Y", "Z")
REAL_OP_KINDS = ("T", "S")

SCALE_MIN = 0.2
SCALE_MAX = 4.0
DEPTH_MIN = 10.0
DEPTH_MAX = 200.0


@dataclass(frozen=True)
class CameraParams:
    """Perspective camera, right-handed with y up; looks from `position`
    toward `look_at`."""

    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    fov_y_deg: float = 50.0
    near: float = 0.1
    far: float = 100.0

    def to_json(self) -> dict:
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "fov_y_deg": self.fov_y_deg,
            "near": self.near,
            "far": self.far,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CameraParams":
        return cls(
            position=tuple(data["position"]),
            look_at=tuple(data["look_at"]),
            fov_y_deg=float(data["fov_y_deg"]),
            near=float(data["near"]),
            far=float(data["far"]),
        )


@dataclass(frozen=True)
class ObjectInstance:
    """One placed object.  Exactly one of the (center_px, depth) and
    (position, rotation_deg) field groups is populated, matching the asset
    kind."""

    instance_id: str
    asset_id: str
    scale_factor: float = 1.0
    center_px: Optional[tuple[float, float]] = None
    depth: Optional[float] = None
    position: Optional[tuple[float, float, float]] = None
    rotation_deg: Optional[tuple[float, float, float]] = None

    @property
    def is_layer(self) -> bool:
        return self.center_px is not None

    def to_json(self) -> dict:
        out: dict = {
            "instance_id": self.instance_id,
            "asset_id": self.asset_id,
            "scale_factor": self.scale_factor,
        }
        if self.center_px is not None:
            out["center_px"] = list(self.center_px)
            out["depth"] = self.depth
        if self.position is not None:
            out["position"] = list(self.position)
            out["rotation_deg"] = list(self.rotation_deg)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ObjectInstance":
        return cls(
            instance_id=data["instance_id"],
            asset_id=data["asset_id"],
            scale_factor=float(data["scale_factor"]),
            center_px=tuple(data["center_px"]) if "center_px" in data else None,
            depth=float(data["depth"]) if data.get("depth") is not None else None,
            position=tuple(data["position"]) if "position" in data else None,
            rotation_deg=tuple(data["rotation_deg"]) if "rotation_deg" in data else None,
        )


@dataclass(frozen=True)
class SceneState:
    domain: str
    background_id: str
    canvas: tuple[int, int]  # (width, height)
    objects: tuple[ObjectInstance, ...]
    camera: Optional[CameraParams] = None
    rng_seed: int = 0
    round_index: int = 0

    def find(self, instance_id: str) -> ObjectInstance:
        for obj in self.objects:
            if obj.instance_id == instance_id:
                return obj
        raise UnknownInstance(f"no instance {instance_id!r} in scene")

    def with_object(self, updated: ObjectInstance) -> "SceneState":
        objs = tuple(updated if o.instance_id == updated.instance_id else o
                     for o in self.objects)
        return replace(self, objects=objs)

    def to_json(self) -> dict:
        out: dict = {
            "domain": self.domain,
            "background_id": self.background_id,
            "canvas": list(self.canvas),
            "objects": [o.to_json() for o in self.objects],
            "rng_seed": self.rng_seed,
            "round_index": self.round_index,
        }
        out["camera"] = self.camera.to_json() if self.camera else None
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SceneState":
        return cls(
            domain=data["domain"],
            background_id=data["background_id"],
            canvas=tuple(int(v) for v in data["canvas"]),
            objects=tuple(ObjectInstance.from_json(o) for o in data["objects"]),
            camera=CameraParams.from_json(data["camera"]) if data.get("camera") else None,
            rng_seed=int(data.get("rng_seed", 0)),
            round_index=int(data.get("round_index", 0)),
        )


OpValue = Union[float, tuple]


@dataclass(frozen=True)
class OperationCommand:
    """One user edit: translate (T), scale (S) or rotate about an object
    axis (X/Y/Z).  T carries (dx, dy, dd) in the realistic domain and a
    ground-plane (dx, dz) in the synthetic one; S a positive multiplier;
    rotations an angle in degrees."""

    target_instance_id: str
    kind: str
    value: OpValue

    def value_json(self):
        return list(self.value) if isinstance(self.value, (tuple, list)) else self.value

    def to_json(self) -> dict:
        return {"instance_id": self.target_instance_id, "kind": self.kind,
                "value": self.value_json()}

    @classmethod
    def from_json(cls, data: dict) -> "OperationCommand":
        value = data["value"]
        if isinstance(value, list):
            value = tuple(float(v) for v in value)
        else:
            value = float(value)
        return cls(target_instance_id=data["instance_id"], kind=data["kind"], value=value)


@dataclass(frozen=True)
class OperationRecord:
    """A command plus its derived source region (pre-state) and target
    bounding box (post-state), all in normalized canvas coordinates."""

    command: OperationCommand
    source_centroid: tuple[float, float]
    source_bbox: tuple[float, float, float, float]
    target_bbox: tuple[float, float, float, float]
    round_index: int

    def to_json(self) -> dict:
        return {
            "round": self.round_index,
            "op": self.command.to_json(),
            "source_centroid": list(self.source_centroid),
            "source_bbox": list(self.source_bbox),
            "target_bbox": list(self.target_bbox),
        }

    @classmethod
    def from_json(cls, data: dict) -> "OperationRecord":
        return cls(
            command=OperationCommand.from_json(data["op"]),
            source_centroid=tuple(float(v) for v in data["source_centroid"]),
            source_bbox=tuple(float(v) for v in data["source_bbox"]),
            target_bbox=tuple(float(v) for v in data["target_bbox"]),
            round_index=int(data["round"]),
        )


@dataclass(frozen=True)
class InstanceAnnotation:
    instance_id: str
    bbox_px: tuple[float, float, float, float]       # clipped to the canvas
    bbox_px_full: tuple[float, float, float, float]  # unclipped footprint
    centroid_px: tuple[float, float]
    visible_fraction: float
    depth_rank: int  # paint/depth order, 0 = farthest
    scale_factor: float = 1.0
    depth: Optional[float] = None

    def to_json(self) -> dict:
        out = {
            "instance_id": self.instance_id,
            "bbox_px": list(self.bbox_px),
            "bbox_px_full": list(self.bbox_px_full),
            "centroid_px": list(self.centroid_px),
            "visible_fraction": self.visible_fraction,
            "depth_rank": self.depth_rank,
            "scale_factor": self.scale_factor,
        }
        if self.depth is not None:
            out["depth"] = self.depth
        return out

    @classmethod
    def from_json(cls, data: dict) -> "InstanceAnnotation":
        return cls(
            instance_id=data["instance_id"],
            bbox_px=tuple(float(v) for v in data["bbox_px"]),
            bbox_px_full=tuple(float(v) for v in data["bbox_px_full"]),
            centroid_px=tuple(float(v) for v in data["centroid_px"]),
            visible_fraction=float(data["visible_fraction"]),
            depth_rank=int(data["depth_rank"]),
            scale_factor=float(data.get("scale_factor", 1.0)),
            depth=float(data["depth"]) if data.get("depth") is not None else None,
        )


@dataclass
class Observation:
    """A rendered view of a state: canvas-sized RGBA plus per-instance
    annotations."""

    image: np.ndarray  # (H, W, 4) uint8
    annotations: dict[str, InstanceAnnotation]

    def annotations_json(self) -> dict:
        return {iid: ann.to_json() for iid, ann in sorted(self.annotations.items())}


# -- validation ----------------------------------------------------------------

def validate_instance(inst: ObjectInstance, state: SceneState, store: AssetStore) -> None:
    asset = store.get(inst.asset_id)
    if not (SCALE_MIN <= inst.scale_factor <= SCALE_MAX):
        raise BoundViolation(
            f"{inst.instance_id}: scale factor {inst.scale_factor} outside "
            f"[{SCALE_MIN}, {SCALE_MAX}]")
    has_2d = inst.center_px is not None or inst.depth is not None
    has_3d = inst.position is not None or inst.rotation_deg is not None
    if has_2d == has_3d:
        raise IllegalCommand(
            f"{inst.instance_id}: exactly one of the 2d/3d placement groups must be set")
    if asset.kind == KIND_LAYER2D:
        if not has_2d or inst.center_px is None or inst.depth is None:
            raise IllegalCommand(f"{inst.instance_id}: layer2d asset needs center_px and depth")
        if not (DEPTH_MIN <= inst.depth <= DEPTH_MAX):
            raise BoundViolation(
                f"{inst.instance_id}: depth {inst.depth} outside [{DEPTH_MIN}, {DEPTH_MAX}]")
        if state.domain != DOMAIN_REAL:
            raise IllegalCommand(f"{inst.instance_id}: layer2d instance in {state.domain} scene")
    else:
        if not has_3d or inst.position is None or inst.rotation_deg is None:
            raise IllegalCommand(f"{inst.instance_id}: box3d asset needs position and rotation")
        if state.domain != DOMAIN_SYN:
            raise IllegalCommand(f"{inst.instance_id}: box3d instance in {state.domain} scene")


def validate_state(state: SceneState, store: AssetStore) -> None:
    if state.canvas[0] <= 0 or state.canvas[1] <= 0:
        raise BoundViolation(f"canvas {state.canvas} must be positive")
    seen: set[str] = set()
    for inst in state.objects:
        if inst.instance_id in seen:
            raise IllegalCommand(f"duplicate instance id {inst.instance_id!r}")
        seen.add(inst.instance_id)
        validate_instance(inst, state, store)
    if state.domain == DOMAIN_SYN and state.camera is None:
        raise IllegalCommand("synthetic scene needs a camera")


# -- transitions ----------------------------------------------------------------

def legal_kinds(domain: str) -> tuple[str, ...]:
    return REAL_OP_KINDS if domain == DOMAIN_REAL else OP_KINDS


def apply_operation(state: SceneState, cmd: OperationCommand, store: AssetStore) -> SceneState:
    """Transition function: returns the next state for one edit, leaving the
    input untouched.  Raises instead of producing an invalid state."""
    inst = state.find(cmd.target_instance_id)
    if cmd.kind not in OP_KINDS:
        raise IllegalCommand(f"unknown operation kind {cmd.kind!r}")
    if cmd.kind not in legal_kinds(state.domain):
        raise IllegalKindForDomain(
            f"operation {cmd.kind} not available in domain {state.domain!r}")

    if state.domain == DOMAIN_SYN:
        from . import sim3d

        return sim3d.apply_operation_3d(state, cmd, store)

    width, height = state.canvas
    if cmd.kind == "T":
        value = _check_triple(cmd.value)
        dx, dy, dd = value
        cx, cy = inst.center_px
        nx, ny = cx + dx, cy + dy
        nd = inst.depth + dd
        if not (DEPTH_MIN <= nd <= DEPTH_MAX):
            raise BoundViolation(f"depth {nd} outside [{DEPTH_MIN}, {DEPTH_MAX}]")
        # keep the object recoverable: its center may not leave the canvas
        if not (0.0 <= nx <= width and 0.0 <= ny <= height):
            raise BoundViolation(f"center ({nx}, {ny}) leaves the {width}x{height} canvas")
        new_inst = replace(inst, center_px=(nx, ny), depth=nd)
    elif cmd.kind == "S":
        mult = _check_scalar(cmd.value)
        if mult <= 0:
            raise BoundViolation(f"scale multiplier {mult} must be positive")
        ns = inst.scale_factor * mult
        if not (SCALE_MIN <= ns <= SCALE_MAX):
            raise BoundViolation(f"scale factor {ns} outside [{SCALE_MIN}, {SCALE_MAX}]")
        new_inst = replace(inst, scale_factor=ns)
    else:  # pragma: no cover - guarded by legal_kinds above
        raise IllegalKindForDomain(cmd.kind)

    next_state = state.with_object(new_inst)
    next_state = replace(next_state, round_index=state.round_index + 1)
    validate_instance(new_inst, next_state, store)
    return next_state


def _check_triple(value) -> tuple[float, float, float]:
    if not isinstance(value, (tuple, list)) or len(value) != 3:
        raise IllegalCommand(f"realistic translation needs (dx, dy, dd), got {value!r}")
    return tuple(float(v) for v in value)


def _check_scalar(value) -> float:
    if isinstance(value, (tuple, list)):
        raise IllegalCommand(f"expected a scalar value, got {value!r}")
    return float(value)


# -- derivations ----------------------------------------------------------------

def normalize_bbox(bbox_px, canvas) -> tuple[float, float, float, float]:
    w, h = canvas
    x0, y0, x1, y1 = bbox_px
    return (x0 / w, y0 / h, x1 / w, y1 / h)


def instance_footprint_px(state: SceneState, instance_id: str,
                          store: AssetStore) -> tuple[float, float, float, float]:
    """Tight unclipped pixel box of the instance's rasterized footprint."""
    inst = state.find(instance_id)
    if state.domain == DOMAIN_REAL:
        from . import render2d
        from .errors import DegenerateFootprint

        placed = render2d.rasterize_layer(store.get(inst.asset_id), inst, state.canvas)
        if placed.degenerate:
            raise DegenerateFootprint(
                f"{instance_id} rasterizes to a zero-area footprint")
        return placed.footprint_px_full
    from . import sim3d

    return sim3d.projected_bbox_px(state, inst, store)


def derive_source_region(state: SceneState, instance_id: str, store: AssetStore):
    """Locate an object before (or after) manipulation: returns the
    normalized centroid and the normalized tight bounding box of its
    rasterized footprint.  Off-canvas extent keeps its (possibly negative)
    coordinates."""
    bbox_px = instance_footprint_px(state, instance_id, store)
    bbox = normalize_bbox(bbox_px, state.canvas)
    centroid = ((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0)
    return centroid, bbox


def bbox_coverage_mask(bbox, grid: tuple[int, int]) -> np.ndarray:
    """Rasterize a normalized box to a (h, w) binary grid: a cell is set iff
    its center lies inside the closed box."""
    h, w = grid
    u0, v0, u1, v1 = bbox
    cx = (np.arange(w) + 0.5) / w
    cy = (np.arange(h) + 0.5) / h
    in_x = (cx >= u0) & (cx <= u1)
    in_y = (cy >= v0) & (cy <= v1)
    return (in_y[:, None] & in_x[None, :]).astype(np.uint8)


def derive_target_mask(state_after: SceneState, instance_id: str, grid: tuple[int, int],
                       store: AssetStore, omit: bool = False) -> np.ndarray:
    """Binary target-region mask on the requested grid; an all-zero mask is
    returned when the caller asks for mask omission."""
    if omit:
        return np.zeros(grid, np.uint8)
    state_after.find(instance_id)  # raises UnknownInstance early
    _, bbox = derive_source_region(state_after, instance_id, store)
    return bbox_coverage_mask(bbox, grid)


def render_state(state: SceneState, store: AssetStore) -> Observation:
    """Observation map: dispatches to the domain renderer."""
    if state.domain == DOMAIN_REAL:
        from . import render2d

        return render2d.composite(state, store)
    from . import sim3d

    return sim3d.proxy_render(state, store)
