"""Asset store: RGBA layers for the realistic domain and boxes for the
synthetic one, indexed by an ``assets.json`` file next to the PNG layers.

Index schema (pinned): a JSON object ``{"schema_version": 1, "assets": [...]}``
where each entry is ``{id, kind, tags, extent?}``.  ``kind`` is ``"layer2d"``
(the layer lives in ``<id>.png``) or ``"box3d"`` (``extent`` gives the box
size ``[w, h, d]`` in scene units, y up).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image

from .errors import MissingAsset, SchemaViolation

KIND_LAYER2D = "layer2d"
KIND_BOX3D = "box3d"


@dataclass(frozen=True)
class ObjectAsset:
    """One scene element: a cut-out RGBA layer or a 3D box proxy."""

    id: str
    kind: str
    tags: tuple[str, ...] = ()
    layer: Optional[np.ndarray] = None  # (H, W, 4) uint8, layer2d only
    premultiplied: bool = False  # alpha convention of `layer`
    extent: Optional[tuple[float, float, float]] = None  # (w, h, d), box3d only

    def __post_init__(self):
        if self.kind == KIND_LAYER2D:
            if self.layer is None:
                raise SchemaViolation(f"layer2d asset {self.id!r} has no layer")
            if self.layer.ndim != 3 or self.layer.shape[2] != 4:
                raise SchemaViolation(f"asset {self.id!r}: layer must be (H, W, 4)")
            if not np.any(self.layer[:, :, 3]):
                # fully transparent layers would yield empty footprints downstream
                raise SchemaViolation(f"asset {self.id!r}: layer has zero opaque pixels")
        elif self.kind == KIND_BOX3D:
            if self.extent is None or len(self.extent) != 3:
                raise SchemaViolation(f"box3d asset {self.id!r} needs a 3-component extent")
            if not all(e > 0 for e in self.extent):
                raise SchemaViolation(f"asset {self.id!r}: extents must be strictly positive")
        else:
            raise SchemaViolation(f"asset {self.id!r}: unknown kind {self.kind!r}")

    def layer_straight(self) -> np.ndarray:
        """Layer as float64 with straight (unassociated) alpha in [0, 1]."""
        rgba = self.layer.astype(np.float64)
        rgb, a = rgba[:, :, :3], rgba[:, :, 3] / 255.0
        if self.premultiplied:
            with np.errstate(invalid="ignore", divide="ignore"):
                rgb = np.where(a[:, :, None] > 0, rgb / np.maximum(a[:, :, None], 1e-12), 0.0)
        out = np.empty_like(rgba)
        out[:, :, :3] = rgb
        out[:, :, 3] = a
        return out


class AssetStore:
    """In-memory id -> asset map with uniqueness enforced."""

    def __init__(self, assets: Iterable[ObjectAsset] = ()):
        self._assets: dict[str, ObjectAsset] = {}
        for asset in assets:
            self.add(asset)

    def add(self, asset: ObjectAsset) -> None:
        if asset.id in self._assets:
            raise SchemaViolation(f"duplicate asset id {asset.id!r}")
        self._assets[asset.id] = asset

    def get(self, asset_id: str) -> ObjectAsset:
        try:
            return self._assets[asset_id]
        except KeyError:
            raise MissingAsset(f"unknown asset {asset_id!r}") from None

    def __contains__(self, asset_id: str) -> bool:
        return asset_id in self._assets

    def __len__(self) -> int:
        return len(self._assets)

    def ids(self, kind: Optional[str] = None, tag: Optional[str] = None) -> list[str]:
        out = []
        for aid, asset in self._assets.items():
            if kind is not None and asset.kind != kind:
                continue
            if tag is not None and tag not in asset.tags:
                continue
            out.append(aid)
        return sorted(out)

    def index_json(self) -> dict:
        entries = []
        for aid in sorted(self._assets):
            asset = self._assets[aid]
            entry: dict = {"id": asset.id, "kind": asset.kind, "tags": list(asset.tags)}
            if asset.extent is not None:
                entry["extent"] = list(asset.extent)
            entries.append(entry)
        return {"schema_version": 1, "assets": entries}

    @classmethod
    def load(cls, root: str | Path) -> "AssetStore":
        root = Path(root)
        index_path = root / "assets.json"
        if not index_path.is_file():
            raise MissingAsset(f"no assets.json under {root}")
        try:
            index = json.loads(index_path.read_text())
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"assets.json is not valid JSON: {exc}") from exc
        if not isinstance(index, dict) or "assets" not in index:
            raise SchemaViolation("assets.json must be an object with an 'assets' list")
        store = cls()
        for entry in index["assets"]:
            try:
                aid, kind = entry["id"], entry["kind"]
            except (TypeError, KeyError) as exc:
                raise SchemaViolation(f"asset entry missing id/kind: {entry!r}") from exc
            tags = tuple(entry.get("tags", ()))
            if kind == KIND_LAYER2D:
                png = root / f"{aid}.png"
                if not png.is_file():
                    raise MissingAsset(f"layer file {png} not found")
                layer = np.asarray(Image.open(png).convert("RGBA"))
                store.add(ObjectAsset(id=aid, kind=kind, tags=tags, layer=layer))
            else:
                extent = entry.get("extent")
                store.add(ObjectAsset(id=aid, kind=kind, tags=tags,
                                      extent=tuple(extent) if extent else None))
        return store


def save_store(store: AssetStore, root: str | Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    index = store.index_json()
    for entry in index["assets"]:
        asset = store.get(entry["id"])
        if asset.kind == KIND_LAYER2D:
            Image.fromarray(asset.layer, "RGBA").save(root / f"{asset.id}.png")
    (root / "assets.json").write_text(json.dumps(index, indent=2, sort_keys=True))


# -- procedural demo pack -----------------------------------------------------

def _checker_background(size: int, a: tuple, b: tuple, cells: int) -> np.ndarray:
    img = np.zeros((size, size, 4), np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    cell = max(1, size // cells)
    parity = ((yy // cell) + (xx // cell)) % 2
    img[:, :, :3] = np.where(parity[:, :, None] == 0, a, b)
    img[:, :, 3] = 255
    return img


def _gradient_background(size: int, top: tuple, bottom: tuple) -> np.ndarray:
    img = np.zeros((size, size, 4), np.uint8)
    t = np.linspace(0.0, 1.0, size)[:, None, None]
    img[:, :, :3] = np.rint((1 - t) * np.array(top) + t * np.array(bottom)).astype(np.uint8)
    img[:, :, 3] = 255
    return img


def _ellipse_layer(size: int, color: tuple, rx: float, ry: float, ring: bool = False) -> np.ndarray:
    img = np.zeros((size, size, 4), np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    cx = cy = (size - 1) / 2.0
    rr = ((xx - cx) / (rx * size / 2)) ** 2 + ((yy - cy) / (ry * size / 2)) ** 2
    inside = rr <= 1.0
    if ring:
        inside &= rr >= 0.45
    img[inside, 0] = color[0]
    img[inside, 1] = color[1]
    img[inside, 2] = color[2]
    img[inside, 3] = 255
    # soften the rim a little so resampling has sub-pixel alpha to chew on
    rim = (rr > 1.0) & (rr <= 1.12)
    img[rim, :3] = color
    img[rim, 3] = 110
    return img


def _diamond_layer(size: int, color: tuple) -> np.ndarray:
    img = np.zeros((size, size, 4), np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    inside = (np.abs(xx - c) + np.abs(yy - c)) <= 0.9 * c
    img[inside, 0] = color[0]
    img[inside, 1] = color[1]
    img[inside, 2] = color[2]
    img[inside, 3] = 255
    return img


def build_demo_store(layer_px: int = 256) -> AssetStore:
    """Procedural asset pack used by tests, the CLI and the demo UI."""
    store = AssetStore()
    store.add(ObjectAsset("bg-meadow", KIND_LAYER2D, ("background",),
                          layer=_gradient_background(layer_px, (96, 148, 214), (52, 120, 66))))
    store.add(ObjectAsset("bg-studio", KIND_LAYER2D, ("background",),
                          layer=_checker_background(layer_px, (210, 210, 212), (170, 172, 176), 8)))
    store.add(ObjectAsset("ball-red", KIND_LAYER2D, ("object", "round"),
                          layer=_ellipse_layer(layer_px, (204, 42, 38), 0.92, 0.92)))
    store.add(ObjectAsset("ball-blue", KIND_LAYER2D, ("object", "round"),
                          layer=_ellipse_layer(layer_px, (40, 84, 200), 0.92, 0.70)))
    store.add(ObjectAsset("ring-gold", KIND_LAYER2D, ("object", "round"),
                          layer=_ellipse_layer(layer_px, (218, 168, 32), 0.9, 0.9, ring=True)))
    store.add(ObjectAsset("gem-green", KIND_LAYER2D, ("object",),
                          layer=_diamond_layer(layer_px, (46, 160, 84))))
    store.add(ObjectAsset("crate", KIND_BOX3D, ("object",), extent=(1.0, 1.0, 1.0)))
    store.add(ObjectAsset("tower", KIND_BOX3D, ("object",), extent=(0.6, 1.8, 0.6)))
    store.add(ObjectAsset("slab", KIND_BOX3D, ("object",), extent=(1.6, 0.4, 1.0)))
    store.add(ObjectAsset("pillar", KIND_BOX3D, ("object",), extent=(0.4, 1.2, 0.4)))
    return store


def write_demo_assets(root: str | Path, layer_px: int = 256) -> AssetStore:
    store = build_demo_store(layer_px=layer_px)
    save_store(store, root)
    return store
