"""Realistic-domain observation map: depth-dependent sizing and painter's
algorithm alpha compositing.

Determinism contract: sizes stay real-valued through resampling, layer
origins round to integers, compositing runs in float64 premultiplied space
and rounds half-to-even to 8-bit once at the end.  Re-rendering a state is
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assets import KIND_LAYER2D, AssetStore, ObjectAsset
from .errors import BoundViolation, IllegalCommand, SubpixelSize
from .scene import (
    DEPTH_MAX,
    DEPTH_MIN,
    SCALE_MAX,
    SCALE_MIN,
    InstanceAnnotation,
    ObjectInstance,
    Observation,
    SceneState,
)


@dataclass(frozen=True)
class SizeConfig:
    """Depth/size bounds; `shat_*` are the pre-scale pixel bounds derived
    from the canvas shortest side l as l/20 and l/4."""

    d_min: float = DEPTH_MIN
    d_max: float = DEPTH_MAX
    shat_min: float = 512 / 20
    shat_max: float = 512 / 4

    def __post_init__(self):
        if not (self.d_min < self.d_max and self.shat_min < self.shat_max):
            raise BoundViolation(f"ill-ordered size config {self}")

    @classmethod
    def for_canvas(cls, canvas: tuple[int, int]) -> "SizeConfig":
        l = min(canvas)
        return cls(shat_min=l / 20.0, shat_max=l / 4.0)


def compute_object_size(d: float, f_s: float, cfg: SizeConfig) -> float:
    """Shortest-side target size in pixels for an object at depth d with
    scale factor f_s: linear from s_max at d_min down to s_min at d_max,
    where s = s_hat * f_s."""
    if not (cfg.d_min <= d <= cfg.d_max):
        raise BoundViolation(f"depth {d} outside [{cfg.d_min}, {cfg.d_max}]")
    if not (SCALE_MIN <= f_s <= SCALE_MAX):
        raise BoundViolation(f"scale factor {f_s} outside [{SCALE_MIN}, {SCALE_MAX}]")
    s_min = cfg.shat_min * f_s
    s_max = cfg.shat_max * f_s
    return (d - cfg.d_max) * (s_min - s_max) / (cfg.d_max - cfg.d_min) + s_min


def resize_bilinear(rgba: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resampling of a straight-alpha float RGBA layer.
    Destination pixel centers map to source coordinates; all four channels
    are interpolated jointly.  Separable two-pass (x then y) for speed; the
    per-element arithmetic matches the direct four-tap formula bitwise."""
    src_h, src_w = rgba.shape[:2]
    if (out_h, out_w) == (src_h, src_w):
        return rgba.copy()
    ys = (np.arange(out_h) + 0.5) * (src_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (src_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, src_h - 1.0)
    xs = np.clip(xs, 0.0, src_w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    xlerped = rgba[:, x0] * (1 - fx) + rgba[:, x1] * fx
    return xlerped[y0] * (1 - fy) + xlerped[y1] * fy


class _FifoMemo:
    """Tiny bounded memo for pure recomputations (resizes, premultiplies).
    Values keep a reference to their source asset so the id()-based keys stay
    valid for the cache lifetime."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.data: dict = {}

    def get(self, key):
        entry = self.data.get(key)
        return entry[1] if entry is not None else None

    def put(self, key, anchor, value):
        if key not in self.data and len(self.data) >= self.capacity:
            self.data.pop(next(iter(self.data)))
        self.data[key] = (anchor, value)


_straight_memo = _FifoMemo(16)    # id(asset) -> straight float layer
_resize_memo = _FifoMemo(24)      # (id(asset), out_h, out_w) -> resized layer
_background_memo = _FifoMemo(8)   # (id(asset), w, h) -> (premult, alpha)


def _straight_layer(asset: ObjectAsset) -> np.ndarray:
    key = id(asset)
    cached = _straight_memo.get(key)
    if cached is None:
        cached = asset.layer_straight()
        cached.setflags(write=False)
        _straight_memo.put(key, asset, cached)
    return cached


def _resized_layer(asset: ObjectAsset, out_h: int, out_w: int) -> np.ndarray:
    key = (id(asset), out_h, out_w)
    cached = _resize_memo.get(key)
    if cached is None:
        cached = resize_bilinear(_straight_layer(asset), out_h, out_w)
        cached.setflags(write=False)
        _resize_memo.put(key, asset, cached)
    return cached


@dataclass
class PlacedLayer:
    """A resized layer positioned on the canvas.  `rgba` is float64 with RGB
    in [0, 255] and straight alpha in [0, 1]; `origin` is the integer canvas
    coordinate of its top-left corner."""

    rgba: np.ndarray
    origin: tuple[int, int]  # (x, y)
    bbox_px: tuple[float, float, float, float]       # raster box clipped to canvas
    bbox_px_full: tuple[float, float, float, float]  # raster box, unclipped
    footprint_px_full: tuple[float, float, float, float]  # alpha>0 tight box, unclipped
    degenerate: bool = False  # resampling left no opaque pixels

    @property
    def opaque_mask(self) -> np.ndarray:
        return self.rgba[:, :, 3] > 0.0


def rasterize_layer(asset: ObjectAsset, instance: ObjectInstance,
                    canvas: tuple[int, int], cfg: SizeConfig | None = None) -> PlacedLayer:
    """Resize a layer asset for its depth/scale and center it at the
    instance position."""
    if asset.kind != KIND_LAYER2D:
        raise IllegalCommand(f"asset {asset.id!r} is not a layer")
    if cfg is None:
        cfg = SizeConfig.for_canvas(canvas)
    size = compute_object_size(instance.depth, instance.scale_factor, cfg)
    if size < 1.0:
        raise SubpixelSize(f"computed size {size:.3f}px for {instance.instance_id}")
    src_h, src_w = asset.layer.shape[:2]
    scale = size / min(src_h, src_w)
    out_h = max(1, int(round(src_h * scale)))
    out_w = max(1, int(round(src_w * scale)))
    resized = _resized_layer(asset, out_h, out_w)

    cx, cy = instance.center_px
    ox = int(round(cx - out_w / 2.0))
    oy = int(round(cy - out_h / 2.0))
    full = (float(ox), float(oy), float(ox + out_w), float(oy + out_h))
    width, height = canvas
    clipped = (max(full[0], 0.0), max(full[1], 0.0),
               min(full[2], float(width)), min(full[3], float(height)))

    alpha_cols = np.nonzero(resized[:, :, 3].any(axis=0))[0]
    alpha_rows = np.nonzero(resized[:, :, 3].any(axis=1))[0]
    degenerate = not (alpha_cols.size and alpha_rows.size)
    if degenerate:
        footprint = full  # nothing opaque survived resampling
    else:
        footprint = (float(ox + alpha_cols[0]), float(oy + alpha_rows[0]),
                     float(ox + alpha_cols[-1] + 1), float(oy + alpha_rows[-1] + 1))
    return PlacedLayer(rgba=resized, origin=(ox, oy), bbox_px=clipped,
                       bbox_px_full=full, footprint_px_full=footprint,
                       degenerate=degenerate)


def paint_order(objects) -> list:
    """Painter ordering: farthest first; equal depths keep insertion order so
    later-inserted objects end up on top."""
    return sorted(objects, key=lambda o: o.depth, reverse=True)


def _background_canvas(state: SceneState, store: AssetStore) -> np.ndarray:
    bg = store.get(state.background_id)
    if bg.kind != KIND_LAYER2D:
        raise IllegalCommand(f"background {state.background_id!r} is not a layer")
    width, height = state.canvas
    if bg.layer.shape[:2] == (height, width):
        return _straight_layer(bg)
    return _resized_layer(bg, height, width)


def _background_premult(state: SceneState, store: AssetStore):
    """Premultiplied background canvas, memoized per (asset, canvas)."""
    bg = store.get(state.background_id)
    key = (id(bg), *state.canvas)
    cached = _background_memo.get(key)
    if cached is None:
        layer = _background_canvas(state, store)
        premult = layer[:, :, :3] * layer[:, :, 3:4]
        alpha = layer[:, :, 3].copy()
        premult.setflags(write=False)
        alpha.setflags(write=False)
        cached = (premult, alpha)
        _background_memo.put(key, bg, cached)
    return cached


def composite(state: SceneState, store: AssetStore,
              cfg: SizeConfig | None = None) -> Observation:
    """Render a realistic-domain state: background first, then objects in
    depth order from farthest to nearest, source-over in premultiplied
    float64, rounded half-to-even to 8-bit."""
    if cfg is None:
        cfg = SizeConfig.for_canvas(state.canvas)
    width, height = state.canvas

    bg_premult, bg_alpha = _background_premult(state, store)
    premult = bg_premult.copy()
    alpha = bg_alpha.copy()

    ordering = paint_order(state.objects)
    placed: dict[str, PlacedLayer] = {}
    top_index = np.full((height, width), -1, np.int32)  # last opaque painter per pixel

    for paint_idx, inst in enumerate(ordering):
        layer = rasterize_layer(store.get(inst.asset_id), inst, state.canvas, cfg)
        placed[inst.instance_id] = layer
        ox, oy = layer.origin
        lh, lw = layer.rgba.shape[:2]
        x0, y0 = max(ox, 0), max(oy, 0)
        x1, y1 = min(ox + lw, width), min(oy + lh, height)
        if x0 >= x1 or y0 >= y1:
            continue
        sub = layer.rgba[y0 - oy:y1 - oy, x0 - ox:x1 - ox]
        src_a = sub[:, :, 3]
        src_p = sub[:, :, :3] * src_a[:, :, None]
        premult[y0:y1, x0:x1] = src_p + premult[y0:y1, x0:x1] * (1.0 - src_a[:, :, None])
        alpha[y0:y1, x0:x1] = src_a + alpha[y0:y1, x0:x1] * (1.0 - src_a)
        region = top_index[y0:y1, x0:x1]
        region[src_a > 0.0] = paint_idx

    image = np.zeros((height, width, 4), np.uint8)
    safe = np.maximum(alpha, 1e-12)[:, :, None]
    rgb = np.where(alpha[:, :, None] > 0.0, premult / safe, 0.0)
    image[:, :, :3] = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    image[:, :, 3] = np.clip(np.rint(alpha * 255.0), 0, 255).astype(np.uint8)

    annotations: dict[str, InstanceAnnotation] = {}
    for paint_idx, inst in enumerate(ordering):
        layer = placed[inst.instance_id]
        total = int(np.count_nonzero(layer.opaque_mask))
        visible = int(np.count_nonzero(top_index == paint_idx))
        fx0, fy0, fx1, fy1 = layer.footprint_px_full
        annotations[inst.instance_id] = InstanceAnnotation(
            instance_id=inst.instance_id,
            bbox_px=(max(fx0, 0.0), max(fy0, 0.0),
                     min(fx1, float(width)), min(fy1, float(height))),
            bbox_px_full=layer.footprint_px_full,
            centroid_px=((fx0 + fx1) / 2.0, (fy0 + fy1) / 2.0),
            visible_fraction=(visible / total) if total else 0.0,
            depth_rank=paint_idx,
            scale_factor=inst.scale_factor,
            depth=inst.depth,
        )
    return Observation(image=image, annotations=annotations)
