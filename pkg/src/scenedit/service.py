"""HTTP session service hosting buffered editing sessions for the web UI.

All endpoints live under /api/v1 and speak JSON except the PNG frame bytes.
Error bodies are {code, message} with codes mirroring the module error
names.  Sessions are in-memory, expire after an idle TTL, and requests
targeting one session are serialized by a per-session lock.
"""

from __future__ import annotations

import io
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from . import sim3d
from .assets import KIND_LAYER2D, AssetStore
from .dataset import export_sequence
from .errors import (
    BoundViolation,
    IllegalCommand,
    InvalidN,
    MissingAsset,
    MissingFrame,
    SceneEditError,
    UnknownSession,
)
from .sampler import EditSequence
from .scene import (
    DEPTH_MAX,
    DEPTH_MIN,
    DOMAIN_REAL,
    DOMAIN_SYN,
    ObjectInstance,
    OperationCommand,
    SceneState,
    validate_state,
)
from .session import (
    SessionBuffers,
    create_session,
    network_stub_generator,
    oracle_generator,
    submit_operation,
)

API_PREFIX = "/api/v1"


@dataclass
class ServiceConfig:
    asset_dir: Path
    canvas: tuple[int, int] = (512, 512)
    max_history: int = 8
    generator: str = "oracle"  # or "network-stub"
    seed: int = 0
    ttl_seconds: float = 1800.0
    export_dir: Optional[Path] = None
    ui_dir: Optional[Path] = None


@dataclass
class ManagedSession:
    session_id: str
    buffers: SessionBuffers
    generate: object
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)

    def touch(self):
        self.last_access = time.monotonic()


class SessionRegistry:
    def __init__(self, ttl_seconds: float):
        self._sessions: dict[str, ManagedSession] = {}
        self._lock = threading.Lock()
        self._counter = 0
        self._ttl = ttl_seconds

    def new_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"s{self._counter:06d}"

    def put(self, managed: ManagedSession) -> None:
        with self._lock:
            self._sessions[managed.session_id] = managed

    def get(self, session_id: str) -> ManagedSession:
        self.purge()
        with self._lock:
            managed = self._sessions.get(session_id)
        if managed is None:
            raise UnknownSession(f"no session {session_id!r}")
        managed.touch()
        return managed

    def drop(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None

    def purge(self) -> None:
        now = time.monotonic()
        with self._lock:
            stale = [sid for sid, m in self._sessions.items()
                     if now - m.last_access > self._ttl]
            for sid in stale:
                del self._sessions[sid]


_STATUS_BY_CODE = {
    "UnknownSession": 404,
    "MissingAsset": 404,
    "MissingFrame": 404,
    "GeneratorFailure": 500,
    "IoFailure": 500,
}


def _error_response(exc: SceneEditError) -> JSONResponse:
    status = _STATUS_BY_CODE.get(exc.code, 422)
    return JSONResponse(status_code=status,
                        content={"code": exc.code, "message": str(exc)})


def _frame_url(session_id: str, round_index: int) -> str:
    return f"{API_PREFIX}/session/{session_id}/frame/{round_index}.png"


def _png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, "RGBA").save(buf, format="PNG")
    return buf.getvalue()


def _init_instance(i: int, spec: dict, store: AssetStore, canvas, domain: str,
                   rng: np.random.Generator) -> ObjectInstance:
    asset = store.get(spec["asset_id"])
    init = spec.get("init") or {}
    instance_id = spec.get("instance_id") or f"obj{i}"
    scale = float(init.get("scale_factor", 1.0))
    if asset.kind == KIND_LAYER2D:
        width, height = canvas
        center = init.get("center_px") or [float(rng.uniform(0.1 * width, 0.9 * width)),
                                           float(rng.uniform(0.1 * height, 0.9 * height))]
        depth = float(init.get("depth", rng.uniform(DEPTH_MIN, DEPTH_MAX)))
        return ObjectInstance(instance_id=instance_id, asset_id=asset.id,
                              scale_factor=scale, center_px=tuple(center), depth=depth)
    position = init.get("position")
    rotation = init.get("rotation_deg") or [0.0, 0.0, 0.0]
    if position is None:
        half = sim3d.GROUND_EXTENT / 2.0
        position = [float(rng.uniform(-half, half)), 0.0,
                    float(rng.uniform(-half, half))]
    inst = ObjectInstance(instance_id=instance_id, asset_id=asset.id,
                          scale_factor=scale, position=tuple(position),
                          rotation_deg=tuple(rotation))
    return sim3d.reground(inst, asset)


def _build_initial_state(body: dict, store: AssetStore, config: ServiceConfig,
                         rng: np.random.Generator) -> SceneState:
    objects_spec = body.get("objects") or []
    if not objects_spec:
        raise IllegalCommand("a session needs at least one object")
    kinds = {store.get(o["asset_id"]).kind for o in objects_spec}
    if len(kinds) > 1:
        raise IllegalCommand("cannot mix layer2d and box3d objects in one session")
    domain = DOMAIN_REAL if kinds == {KIND_LAYER2D} else DOMAIN_SYN
    canvas = tuple(body.get("canvas") or config.canvas)
    background_id = body.get("background_id") or (
        "backdrop" if domain == DOMAIN_SYN else "")
    if domain == DOMAIN_REAL and background_id not in store:
        raise MissingAsset(f"unknown background {background_id!r}")

    instances = [_init_instance(i, spec, store, canvas, domain, rng)
                 for i, spec in enumerate(objects_spec)]
    camera = sim3d.DEFAULT_CAMERA if domain == DOMAIN_SYN else None
    state = SceneState(domain=domain, background_id=background_id, canvas=canvas,
                       objects=tuple(instances), camera=camera,
                       rng_seed=config.seed)
    validate_state(state, store)
    if domain == DOMAIN_SYN:
        boxes = [sim3d.instance_aabb(o, store.get(o.asset_id)) for o in instances]
        for i, box in enumerate(boxes):
            if not sim3d.aabb_in_frustum(box, camera, canvas):
                raise BoundViolation(
                    f"{instances[i].instance_id} starts outside the view frustum")
            for other in boxes[i + 1:]:
                if box.overlaps(other):
                    raise BoundViolation("initial placement has colliding objects")
    return state


def _parse_command(body: dict) -> OperationCommand:
    try:
        data = {"instance_id": body["instance_id"], "kind": body["kind"],
                "value": body["value"]}
    except KeyError as exc:
        raise IllegalCommand(f"operation body misses {exc}") from exc
    return OperationCommand.from_json(data)


def create_app(config: ServiceConfig) -> FastAPI:
    store = AssetStore.load(config.asset_dir)
    registry = SessionRegistry(config.ttl_seconds)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    rng_lock = threading.Lock()
    app = FastAPI(title="scenedit session service")

    @app.exception_handler(SceneEditError)
    async def handle_domain_error(request: Request, exc: SceneEditError):
        return _error_response(exc)

    @app.get(API_PREFIX + "/health")
    def health():
        return {"status": "ok"}

    @app.get(API_PREFIX + "/assets")
    def assets_index():
        return store.index_json()

    @app.post(API_PREFIX + "/session")
    def create_session_endpoint(body: dict):
        max_history = int(body.get("N", config.max_history))
        if max_history < 1:
            raise InvalidN(f"N must be >= 1, got {max_history}")
        with rng_lock:
            state = _build_initial_state(body, store, config, rng)
        buffers = create_session(state, max_history, store)
        if config.generator == "network-stub":
            generate = network_stub_generator(buffers, seed=config.seed)
        else:
            generate = oracle_generator(buffers)
        managed = ManagedSession(session_id=registry.new_id(), buffers=buffers,
                                 generate=generate)
        registry.put(managed)
        return {
            "session_id": managed.session_id,
            "frame_url": _frame_url(managed.session_id, 0),
            "domain": state.domain,
            "round": 0,
            "canvas": list(state.canvas),
            "annotations": buffers.frames[0].annotations_json(),
        }

    @app.post(API_PREFIX + "/session/{session_id}/op")
    def submit_op(session_id: str, body: dict):
        managed = registry.get(session_id)
        cmd = _parse_command(body)
        target_bbox = body.get("target_bbox")
        with managed.lock:
            frame = submit_operation(managed.buffers, cmd, managed.generate,
                                     seed=config.seed,
                                     target_bbox=tuple(target_bbox) if target_bbox else None)
            round_index = managed.buffers.round_index
        return {
            "round": round_index,
            "frame_url": _frame_url(session_id, round_index),
            "annotations": frame.annotations_json(),
        }

    @app.get(API_PREFIX + "/session/{session_id}/frame/{round_index}.png")
    def get_frame(session_id: str, round_index: int):
        managed = registry.get(session_id)
        with managed.lock:
            if not (0 <= round_index < len(managed.buffers.frames)):
                raise MissingFrame(
                    f"session {session_id} has no frame {round_index}")
            payload = _png_bytes(managed.buffers.frames[round_index].image)
        return Response(content=payload, media_type="image/png")

    @app.get(API_PREFIX + "/session/{session_id}/history")
    def get_history(session_id: str):
        managed = registry.get(session_id)
        with managed.lock:
            return {"rounds": [rec.to_json() for rec in managed.buffers.ops]}

    @app.post(API_PREFIX + "/session/{session_id}/export")
    def export_session(session_id: str, body: dict):
        managed = registry.get(session_id)
        out_name = body.get("out_name")
        if not out_name or "/" in out_name or out_name.startswith("."):
            raise IllegalCommand(f"bad export name {out_name!r}")
        export_root = Path(config.export_dir or "exports")
        with managed.lock:
            b = managed.buffers
            seq = EditSequence(
                seq_id=out_name, domain=b.state.domain, seed=config.seed,
                canvas=b.canvas, config_hash=f"service-{config.seed}",
                states=list(b.state_history), observations=list(b.frames),
                records=list(b.ops))
            manifest_path = export_sequence(seq, export_root)
        return {"manifest_path": str(manifest_path)}

    @app.delete(API_PREFIX + "/session/{session_id}", status_code=204)
    def delete_session(session_id: str):
        if not registry.drop(session_id):
            raise UnknownSession(f"no session {session_id!r}")
        return Response(status_code=204)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(config.ui_dir), html=True),
                  name="ui")
    return app
