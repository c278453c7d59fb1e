"""Rule-based construction of multi-round editing sequences.

Every emitted command is pre-validated through the actual transition
function, so replaying a sequence can never hit a bound, collision or
frustum rejection.  Sampling is driven by an owned numpy Generator; whole
pipelines are reproducible from the seed alone.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import sim3d
from .assets import KIND_BOX3D, KIND_LAYER2D, AssetStore
from .errors import (
    BoundViolation,
    CollisionViolation,
    DegenerateFootprint,
    FrustumViolation,
    IllegalCommand,
    SamplingExhausted,
    SequenceTooShort,
    SubpixelSize,
)
from .scene import (
    DEPTH_MAX,
    DEPTH_MIN,
    DOMAIN_REAL,
    DOMAIN_SYN,
    SCALE_MAX,
    SCALE_MIN,
    ObjectInstance,
    Observation,
    OperationCommand,
    OperationRecord,
    SceneState,
    apply_operation,
    derive_source_region,
    legal_kinds,
    render_state,
)


@dataclass(frozen=True)
class SamplerConfig:
    """All sampling bounds, with the published defaults pinned."""

    seq_len: int = 32
    seed: int = 0
    canvas: tuple[int, int] = (512, 512)
    # realistic domain, per step
    center_step_frac: float = 0.6   # of the canvas shortest side, each axis
    depth_step: float = 30.0
    # shared scale-state bounds
    scale_min: float = SCALE_MIN
    scale_max: float = SCALE_MAX
    # synthetic domain, per step
    step_scale_min: float = 0.2     # per-step multiplier bounds
    step_scale_max: float = 4.0
    angle_x: float = 50.0
    angle_y: float = 45.0
    angle_z: float = 60.0
    translate_frac_3d: float = 0.6  # disk radius as a fraction of the ground extent
    # training-window bounds
    r_min: int = 1
    r_max: int = 12
    # scene construction
    objects_real: tuple[int, int] = (1, 4)
    objects_syn: tuple[int, int] = (2, 5)
    # resampling caps
    value_attempts: int = 64
    pair_retries: int = 8

    def __post_init__(self):
        if self.seq_len < 0:
            raise BoundViolation("seq_len must be non-negative")
        if self.r_min < 1 or self.r_max < self.r_min:
            raise BoundViolation(f"ill-ordered window bounds [{self.r_min}, {self.r_max}]")
        if self.seq_len and self.seq_len < self.r_max:
            raise BoundViolation(
                f"seq_len {self.seq_len} shorter than r_max {self.r_max}")
        for lo, hi, name in ((self.scale_min, self.scale_max, "scale"),
                             (self.step_scale_min, self.step_scale_max, "step_scale"),
                             (self.objects_real[0], self.objects_real[1], "objects_real"),
                             (self.objects_syn[0], self.objects_syn[1], "objects_syn")):
            if lo > hi:
                raise BoundViolation(f"ill-ordered {name} interval [{lo}, {hi}]")

    def angle_bound(self, kind: str) -> float:
        return {"X": self.angle_x, "Y": self.angle_y, "Z": self.angle_z}[kind]

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str | Path) -> "SamplerConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
        for key in ("canvas", "objects_real", "objects_syn"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def _feasible_scale_interval(f_s: float, cfg: SamplerConfig,
                             domain: str) -> tuple[float, float]:
    lo, hi = cfg.scale_min / f_s, cfg.scale_max / f_s
    if domain == DOMAIN_SYN:
        lo, hi = max(lo, cfg.step_scale_min), min(hi, cfg.step_scale_max)
    return lo, hi


def sample_command(state: SceneState, cfg: SamplerConfig, rng: np.random.Generator,
                   store: AssetStore) -> OperationCommand:
    """Uniform object, uniform legal kind, uniform value within bounds;
    resampled through the transition function until it validates."""
    if not state.objects:
        raise IllegalCommand("cannot sample a command for an empty scene")
    kinds = legal_kinds(state.domain)
    l = min(state.canvas)
    for _ in range(cfg.pair_retries + 1):
        target = state.objects[int(rng.integers(len(state.objects)))]
        kind = kinds[int(rng.integers(len(kinds)))]
        for _ in range(cfg.value_attempts):
            if kind == "T" and state.domain == DOMAIN_REAL:
                value = (float(rng.uniform(-cfg.center_step_frac * l,
                                           cfg.center_step_frac * l)),
                         float(rng.uniform(-cfg.center_step_frac * l,
                                           cfg.center_step_frac * l)),
                         float(rng.uniform(-cfg.depth_step, cfg.depth_step)))
            elif kind == "T":
                radius = cfg.translate_frac_3d * sim3d.GROUND_EXTENT
                r = radius * math.sqrt(float(rng.uniform(0.0, 1.0)))
                theta = float(rng.uniform(0.0, 2.0 * math.pi))
                value = (r * math.cos(theta), r * math.sin(theta))
            elif kind == "S":
                lo, hi = _feasible_scale_interval(target.scale_factor, cfg, state.domain)
                if not (lo <= hi):
                    break  # no feasible multiplier for this object; re-pick pair
                value = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
            else:
                bound = cfg.angle_bound(kind)
                value = float(rng.uniform(-bound, bound))
            cmd = OperationCommand(target.instance_id, kind, value)
            try:
                apply_operation(state, cmd, store)
            except (BoundViolation, CollisionViolation, FrustumViolation):
                continue
            return cmd
    raise SamplingExhausted(
        f"no legal command found after {cfg.pair_retries + 1} object/kind retries")


# -- initial scenes -----------------------------------------------------------

def sample_initial_state(domain: str, cfg: SamplerConfig, rng: np.random.Generator,
                         store: AssetStore) -> SceneState:
    """Random scene construction: pick a background and objects, then
    initialize placements uniformly (positions and depth for the realistic
    domain; collision-free grounded spots for the synthetic one)."""
    if domain == DOMAIN_REAL:
        backgrounds = store.ids(kind=KIND_LAYER2D, tag="background")
        layer_ids = [a for a in store.ids(kind=KIND_LAYER2D) if a not in backgrounds]
        if not backgrounds or not layer_ids:
            raise IllegalCommand("asset store lacks realistic backgrounds or objects")
        background = backgrounds[int(rng.integers(len(backgrounds)))]
        lo, hi = cfg.objects_real
        count = int(rng.integers(lo, hi + 1))
        width, height = cfg.canvas
        objects = []
        for i in range(count):
            asset_id = layer_ids[int(rng.integers(len(layer_ids)))]
            objects.append(ObjectInstance(
                instance_id=f"obj{i}", asset_id=asset_id, scale_factor=1.0,
                center_px=(float(rng.uniform(0.0, width)), float(rng.uniform(0.0, height))),
                depth=float(rng.uniform(DEPTH_MIN, DEPTH_MAX))))
        return SceneState(domain=DOMAIN_REAL, background_id=background,
                          canvas=cfg.canvas, objects=tuple(objects), rng_seed=cfg.seed)

    box_ids = store.ids(kind=KIND_BOX3D)
    if not box_ids:
        raise IllegalCommand("asset store lacks box3d assets")
    lo, hi = cfg.objects_syn
    count = int(rng.integers(lo, hi + 1))
    chosen = [box_ids[int(rng.integers(len(box_ids)))] for _ in range(count)]
    return sim3d.place_objects("backdrop", chosen, store, cfg.canvas, rng,
                               rng_seed=cfg.seed)


# -- sequences -----------------------------------------------------------------

@dataclass
class EditSequence:
    """A full multi-round sequence: states, rendered observations and the
    operation records between them."""

    seq_id: str
    domain: str
    seed: int
    canvas: tuple[int, int]
    config_hash: str
    states: list[SceneState]
    observations: list[Observation]
    records: list[OperationRecord]
    truncated: bool = False

    @property
    def seq_len(self) -> int:
        return len(self.records)


def simulate_commands(initial: SceneState, cfg: SamplerConfig, rng: np.random.Generator,
                      store: AssetStore, n_rounds: Optional[int] = None):
    """State-space half of sequence building: sampled commands and the state
    chain, without rendering.  Returns (states, commands, truncated)."""
    n_rounds = cfg.seq_len if n_rounds is None else n_rounds
    states = [initial]
    commands: list[OperationCommand] = []
    truncated = False
    for _ in range(n_rounds):
        try:
            cmd = sample_command(states[-1], cfg, rng, store)
        except SamplingExhausted:
            truncated = True
            break
        commands.append(cmd)
        states.append(apply_operation(states[-1], cmd, store))
    return states, commands, truncated


def build_sequence(initial: SceneState, cfg: SamplerConfig, rng: np.random.Generator,
                   store: AssetStore, seq_id: Optional[str] = None) -> EditSequence:
    """Sample, simulate and render a full sequence: seq_len + 1 observations
    and seq_len operation records, reproducible from the seed."""
    seq_id = seq_id or f"{initial.domain}-{cfg.seed:010d}"
    states = [initial]
    observations = [render_state(initial, store)]
    records: list[OperationRecord] = []
    truncated = False
    for round_idx in range(cfg.seq_len):
        try:
            cmd = sample_command(states[-1], cfg, rng, store)
        except SamplingExhausted:
            truncated = True
            break
        try:
            src_centroid, src_bbox = derive_source_region(
                states[-1], cmd.target_instance_id, store)
            nxt = apply_operation(states[-1], cmd, store)
            obs = render_state(nxt, store)
            _, tgt_bbox = derive_source_region(nxt, cmd.target_instance_id, store)
        except (SubpixelSize, DegenerateFootprint):
            # tiny desk-scale canvases can shrink a validated object below
            # renderability; record the truncation instead of guessing
            truncated = True
            break
        records.append(OperationRecord(
            command=cmd, source_centroid=src_centroid, source_bbox=src_bbox,
            target_bbox=tgt_bbox, round_index=round_idx))
        states.append(nxt)
        observations.append(obs)
    return EditSequence(seq_id=seq_id, domain=initial.domain, seed=cfg.seed,
                        canvas=initial.canvas, config_hash=cfg.config_hash(),
                        states=states, observations=observations, records=records,
                        truncated=truncated)


def sample_training_window(sequence: EditSequence, rng: np.random.Generator,
                           r_min: int = 1, r_max: int = 12):
    """Draw one training sample: r ~ uniform integers [r_min, r_max], a
    uniformly placed window of r (observation, record) pairs, and the
    following observation as the target."""
    n = len(sequence.records)
    if n < r_max:
        raise SequenceTooShort(f"need at least {r_max} rounds, sequence has {n}")
    r = int(rng.integers(r_min, r_max + 1))
    start = int(rng.integers(0, n - r + 1))
    pairs = [(sequence.observations[start + j], sequence.records[start + j])
             for j in range(r)]
    target = sequence.observations[start + r]
    return pairs, target
