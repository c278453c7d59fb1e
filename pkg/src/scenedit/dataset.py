"""Bit-exact dataset export/import, replay validation and the
content-consistency metrics (PSNR / SSIM).

Layout under a dataset root:
    manifest.json                   top-level index of sequences
    <seq_id>/annotations.json       per-sequence manifest (schema below)
    <seq_id>/frames/NNN.png         zero-padded RGBA frames
    <seq_id>/script.json            synthetic sequences only (scene script)

JSON is written with lexicographically sorted keys so exports are
byte-reproducible for a fixed config and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .assets import AssetStore
from .errors import (
    CorruptManifest,
    MissingFrame,
    SceneEditError,
    SchemaViolation,
    ShapeMismatch,
    TooSmall,
)
from .sampler import EditSequence
from .scene import (
    OperationRecord,
    SceneState,
    apply_operation,
    render_state,
)

SCHEMA_VERSION = 1


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1))


def _write_png(path: Path, image: np.ndarray) -> None:
    Image.fromarray(image, "RGBA").save(path, format="PNG")


def _read_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGBA"))


def sequence_manifest(seq: EditSequence) -> dict:
    frames = [f"frames/{i:03d}.png" for i in range(len(seq.observations))]
    rounds = []
    for i, record in enumerate(seq.records):
        post = seq.states[i + 1]
        rounds.append({
            **record.to_json(),
            "objects": [o.to_json() for o in post.objects],
            "annotations": seq.observations[i + 1].annotations_json(),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "id": seq.seq_id,
        "domain": seq.domain,
        "seed": seq.seed,
        "seq_len": len(seq.records),
        "canvas": list(seq.canvas),
        "config_hash": seq.config_hash,
        "truncated": seq.truncated,
        "initial_state": seq.states[0].to_json(),
        "initial_annotations": seq.observations[0].annotations_json(),
        "frames": frames,
        "rounds": rounds,
    }


def export_sequence(seq: EditSequence, root: str | Path) -> Path:
    """Write one sequence and upsert its entry in the top-level manifest.
    Re-exporting the same sequence overwrites with identical bytes."""
    root = Path(root)
    seq_dir = root / seq.seq_id
    (seq_dir / "frames").mkdir(parents=True, exist_ok=True)
    for i, obs in enumerate(seq.observations):
        _write_png(seq_dir / "frames" / f"{i:03d}.png", obs.image)
    _dump_json(seq_dir / "annotations.json", sequence_manifest(seq))

    manifest_path = root / "manifest.json"
    entries = {}
    if manifest_path.is_file():
        try:
            top = json.loads(manifest_path.read_text())
            entries = {e["id"]: e for e in top.get("sequences", [])}
        except (json.JSONDecodeError, TypeError, KeyError):
            entries = {}
    entries[seq.seq_id] = {"id": seq.seq_id, "path": seq.seq_id, "domain": seq.domain,
                           "seq_len": len(seq.records), "config_hash": seq.config_hash}
    _dump_json(manifest_path, {
        "schema_version": SCHEMA_VERSION,
        "sequences": [entries[k] for k in sorted(entries)],
    })
    return manifest_path


@dataclass
class ImportedSequence:
    manifest: dict
    frames: list[np.ndarray]
    initial_state: SceneState
    records: list[OperationRecord]
    directory: Path

    @property
    def seq_id(self) -> str:
        return self.manifest["id"]


def import_sequence(seq_dir: str | Path) -> ImportedSequence:
    """Load one exported sequence, checking structure and frame presence."""
    seq_dir = Path(seq_dir)
    ann_path = seq_dir / "annotations.json"
    if not ann_path.is_file():
        raise CorruptManifest(f"{seq_dir} has no annotations.json")
    try:
        manifest = json.loads(ann_path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptManifest(f"bad JSON in {ann_path}: {exc}") from exc
    for key in ("id", "domain", "seq_len", "canvas", "frames", "rounds",
                "initial_state"):
        if key not in manifest:
            raise SchemaViolation(f"{ann_path} misses required key {key!r}")
    if len(manifest["frames"]) != manifest["seq_len"] + 1:
        raise SchemaViolation(
            f"{ann_path}: {len(manifest['frames'])} frames for seq_len "
            f"{manifest['seq_len']}")
    frames = []
    for rel in manifest["frames"]:
        path = seq_dir / rel
        if not path.is_file():
            raise MissingFrame(f"missing frame file {path}")
        try:
            frames.append(_read_png(path))
        except Exception as exc:
            raise MissingFrame(f"unreadable frame {path}: {exc}") from exc
    try:
        initial = SceneState.from_json(manifest["initial_state"])
        records = [OperationRecord.from_json(r) for r in manifest["rounds"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"{ann_path}: malformed state or records: {exc}") from exc
    return ImportedSequence(manifest=manifest, frames=frames, initial_state=initial,
                            records=records, directory=seq_dir)


# -- validation ---------------------------------------------------------------------

@dataclass
class ValidationEntry:
    sequence: str
    round_index: int
    kind: str
    message: str

    def __str__(self) -> str:
        return f"[{self.sequence} r{self.round_index}] {self.kind}: {self.message}"


@dataclass
class ValidationReport:
    entries: list[ValidationEntry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.entries

    def add(self, sequence: str, round_index: int, kind: str, message: str) -> None:
        self.entries.append(ValidationEntry(sequence, round_index, kind, message))


def validate_sequence(seq_dir: Path, store: AssetStore,
                      report: ValidationReport) -> None:
    name = seq_dir.name
    try:
        imported = import_sequence(seq_dir)
    except SceneEditError as exc:
        report.add(name, -1, exc.code, str(exc))
        return
    state = imported.initial_state
    obs = render_state(state, store)
    if not np.array_equal(obs.image, imported.frames[0]):
        report.add(name, 0, "ReplayMismatch", "frame 0 differs from re-render")
    for record in imported.records:
        r = record.round_index
        try:
            state = apply_operation(state, record.command, store)
        except SceneEditError as exc:
            report.add(name, r, exc.code, str(exc))
            return
        obs = render_state(state, store)
        if not np.array_equal(obs.image, imported.frames[r + 1]):
            report.add(name, r + 1, "ReplayMismatch",
                       f"frame {r + 1} differs from re-render")
        stored_ann = imported.manifest["rounds"][r].get("annotations", {})
        live_ann = obs.annotations_json()
        if stored_ann and stored_ann != live_ann:
            report.add(name, r + 1, "AnnotationMismatch",
                       f"annotations for frame {r + 1} differ from re-render")


def validate_dataset(root: str | Path, store: AssetStore) -> ValidationReport:
    """Replay every sequence through the simulator; violations are data in
    the report, not errors."""
    root = Path(root)
    report = ValidationReport()
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        report.add("<dataset>", -1, "CorruptManifest", f"no manifest.json in {root}")
        return report
    try:
        top = json.loads(manifest_path.read_text())
        sequences = top["sequences"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        report.add("<dataset>", -1, "CorruptManifest", str(exc))
        return report
    for entry in sequences:
        validate_sequence(root / entry["path"], store, report)
    return report


# -- metrics ----------------------------------------------------------------------

def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over the RGB channels of 8-bit
    images; identical inputs yield the +inf sentinel."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    x = a[..., :3].astype(np.float64)
    y = b[..., :3].astype(np.float64)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    xs = np.arange(size) - half
    g = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a 1-d window along both axes."""
    size = window.size
    h, w = img.shape
    rows = np.zeros((h, w - size + 1))
    for k in range(size):
        rows += window[k] * img[:, k:w - size + 1 + k]
    out = np.zeros((h - size + 1, rows.shape[1]))
    for k in range(size):
        out += window[k] * rows[k:h - size + 1 + k, :]
    return out


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Rec.601 luma from the RGB channels."""
    rgb = image[..., :3].astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def ssim(a: np.ndarray, b: np.ndarray, window_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03, data_range: float = 255.0) -> float:
    """Mean local structural similarity with the canonical 11x11 Gaussian
    window (sigma 1.5) on Rec.601 grayscale."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    x = to_grayscale(a)
    y = to_grayscale(b)
    if min(x.shape) < window_size:
        raise TooSmall(f"images {x.shape} smaller than the {window_size}px window")
    win = _gaussian_window(window_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_x = _filter_valid(x, win)
    mu_y = _filter_valid(y, win)
    xx = _filter_valid(x * x, win) - mu_x ** 2
    yy = _filter_valid(y * y, win) - mu_y ** 2
    xy = _filter_valid(x * y, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def adjacent_pair_metrics(frames: list[np.ndarray]) -> tuple[float, float]:
    """Average PSNR/SSIM over adjacent frame pairs of a multi-round series."""
    if len(frames) < 2:
        raise TooSmall("need at least two frames for adjacent-pair metrics")
    psnrs, ssims = [], []
    for a, b in zip(frames, frames[1:]):
        psnrs.append(psnr(a, b))
        ssims.append(ssim(a, b))
    return float(np.mean(psnrs)), float(np.mean(ssims))
