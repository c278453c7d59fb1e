"""Operation/frame conditioning: Fourier embedding, null-blended two-layer
MLP projection per condition slot, channel-concatenated round tokens with a
prepended all-null round, the frame-encoder input stack, and a residual
conv frame encoder whose zero-initialized output projection makes a fresh
encoder contribute exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import erf

from .errors import DimensionMismatch, ShapeMismatch
from .scene import DEPTH_MAX, DEPTH_MIN, DOMAIN_REAL, OperationRecord

DEFAULT_EMBED_DIM = 768
DEFAULT_BANDS = 8

# (slot name, raw value dimension); T is 3-wide in both domains (the
# synthetic ground translation pads its third component with 0)
CONDITION_SLOTS = (
    ("src_centroid", 2),
    ("src_bbox", 4),
    ("op_t", 3),
    ("op_s", 1),
    ("op_x", 1),
    ("op_y", 1),
    ("op_z", 1),
)
OP_SLOT_BY_KIND = {"T": "op_t", "S": "op_s", "X": "op_x", "Y": "op_y", "Z": "op_z"}


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def fourier_embed(values, bands: int = DEFAULT_BANDS) -> np.ndarray:
    """Per component v and band j in 0..bands-1: [sin(2^j pi v),
    cos(2^j pi v)], concatenated component-major -> dim 2 * bands * k."""
    v = np.asarray(values, np.float64).ravel()
    freq = (2.0 ** np.arange(bands)) * np.pi
    ang = v[:, None] * freq[None, :]
    return np.stack([np.sin(ang), np.cos(ang)], axis=-1).reshape(-1)


@dataclass(frozen=True)
class MlpParams:
    """Two-layer projection: affine -> GELU -> affine."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.w1.shape[0]:
            raise DimensionMismatch(
                f"MLP expects input dim {self.w1.shape[0]}, got {x.shape[-1]}")
        return gelu(x @ self.w1 + self.b1) @ self.w2 + self.b2


def _uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass(frozen=True)
class EncoderParams:
    """Per-slot MLP weights and null embeddings for the operation encoder."""

    embed_dim: int
    bands: int
    mlps: dict
    nulls: dict

    @classmethod
    def create(cls, embed_dim: int = DEFAULT_EMBED_DIM, bands: int = DEFAULT_BANDS,
               seed: int = 0) -> "EncoderParams":
        rng = np.random.Generator(np.random.PCG64(seed))
        hidden = 2 * embed_dim
        mlps, nulls = {}, {}
        for name, k in CONDITION_SLOTS:
            in_dim = 2 * bands * k
            mlps[name] = MlpParams(
                w1=_uniform_fan_in(rng, in_dim, (in_dim, hidden)),
                b1=np.zeros(hidden),
                w2=_uniform_fan_in(rng, hidden, (hidden, embed_dim)),
                b2=np.zeros(embed_dim),
            )
            nulls[name] = rng.normal(0.0, 0.02, size=in_dim)
        return cls(embed_dim=embed_dim, bands=bands, mlps=mlps, nulls=nulls)

    def slot_dims(self) -> dict:
        return {name: k for name, k in CONDITION_SLOTS}

    def to_named_arrays(self) -> dict:
        out = {"meta.embed_dim": np.array([self.embed_dim], np.float32),
               "meta.bands": np.array([self.bands], np.float32)}
        for name, mlp in self.mlps.items():
            out[f"{name}.w1"] = mlp.w1
            out[f"{name}.b1"] = mlp.b1
            out[f"{name}.w2"] = mlp.w2
            out[f"{name}.b2"] = mlp.b2
            out[f"{name}.null"] = self.nulls[name]
        return out

    @classmethod
    def from_named_arrays(cls, arrays: dict) -> "EncoderParams":
        embed_dim = int(arrays["meta.embed_dim"][0])
        bands = int(arrays["meta.bands"][0])
        mlps, nulls = {}, {}
        for name, _ in CONDITION_SLOTS:
            mlps[name] = MlpParams(
                w1=np.asarray(arrays[f"{name}.w1"], np.float64),
                b1=np.asarray(arrays[f"{name}.b1"], np.float64),
                w2=np.asarray(arrays[f"{name}.w2"], np.float64),
                b2=np.asarray(arrays[f"{name}.b2"], np.float64),
            )
            nulls[name] = np.asarray(arrays[f"{name}.null"], np.float64)
        return cls(embed_dim=embed_dim, bands=bands, mlps=mlps, nulls=nulls)


def encode_condition(values, present: bool, mlp: MlpParams, null_embedding: np.ndarray,
                     bands: int = DEFAULT_BANDS) -> np.ndarray:
    """Blend m * Fourier(c) + (1 - m) * e_null before the MLP; with m = 0 the
    output is independent of the condition value."""
    emb = fourier_embed(values, bands)
    if emb.shape != null_embedding.shape:
        raise DimensionMismatch(
            f"condition dim {emb.shape} vs null embedding {null_embedding.shape}")
    m = 1.0 if present else 0.0
    return mlp.apply(m * emb + (1.0 - m) * null_embedding)


def encode_slot(params: EncoderParams, name: str, values, present: bool) -> np.ndarray:
    return encode_condition(values, present, params.mlps[name], params.nulls[name],
                            params.bands)


@dataclass(frozen=True)
class TokenLayout:
    """Channel layout of one assembled token: slot name -> (offset, width)."""

    slots: tuple
    token_dim: int

    def channel_range(self, name: str) -> tuple[int, int]:
        for slot, offset, width in self.slots:
            if slot == name:
                return offset, offset + width
        raise DimensionMismatch(f"no slot {name!r} in layout")

    def slice(self, block: "FeatureBlock", token: int, name: str) -> np.ndarray:
        lo, hi = self.channel_range(name)
        return block.data[:, token, lo:hi]


@dataclass
class FeatureBlock:
    """(frames, tokens, channels) array with an optional layout descriptor."""

    data: np.ndarray
    layout: Optional[TokenLayout] = None

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeMismatch(f"feature block must be 3-d, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ShapeMismatch("feature block contains non-finite entries")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


def _op_slot_values(record: OperationRecord, canvas, domain: str,
                    ground_extent: float) -> dict:
    """Normalized raw values per operation slot for one round; only the slot
    matching the round's kind is marked present."""
    cmd = record.command
    width, height = canvas
    values = {"op_t": (0.0, 0.0, 0.0), "op_s": (1.0,), "op_x": (0.0,),
              "op_y": (0.0,), "op_z": (0.0,)}
    present = {name: False for name in values}
    slot = OP_SLOT_BY_KIND[cmd.kind]
    present[slot] = True
    if cmd.kind == "T":
        if domain == DOMAIN_REAL:
            dx, dy, dd = cmd.value
            values["op_t"] = (dx / width, dy / height, dd / (DEPTH_MAX - DEPTH_MIN))
        else:
            dx, dz = cmd.value
            values["op_t"] = (dx / ground_extent, dz / ground_extent, 0.0)
    elif cmd.kind == "S":
        values["op_s"] = (float(cmd.value),)
    else:
        values[slot] = (float(cmd.value) / 360.0,)
    return values, present


def assemble_operation_tokens(records: Sequence[OperationRecord], params: EncoderParams,
                              canvas: tuple[int, int], domain: str,
                              ground_extent: float = 10.0) -> FeatureBlock:
    """Eq.-style token assembly: token i >= 1 channel-concatenates the seven
    encoded condition slots of round i - 1; token 0 is the all-null round for
    the source frame."""
    slots = []
    offset = 0
    for name, _ in CONDITION_SLOTS:
        slots.append((name, offset, params.embed_dim))
        offset += params.embed_dim
    layout = TokenLayout(slots=tuple(slots), token_dim=offset)

    dims = params.slot_dims()
    tokens = np.zeros((1, len(records) + 1, layout.token_dim))

    def fill(token_idx: int, name: str, values, present: bool):
        lo, hi = layout.channel_range(name)
        tokens[0, token_idx, lo:hi] = encode_slot(params, name, values, present)

    for name, k in CONDITION_SLOTS:
        fill(0, name, np.zeros(k), present=False)

    for i, record in enumerate(records):
        token = i + 1
        fill(token, "src_centroid", record.source_centroid, True)
        fill(token, "src_bbox", record.source_bbox, True)
        values, present = _op_slot_values(record, canvas, domain, ground_extent)
        for name in ("op_t", "op_s", "op_x", "op_y", "op_z"):
            vals = np.asarray(values[name], np.float64)
            if vals.size != dims[name]:
                raise DimensionMismatch(f"slot {name} expects {dims[name]} values")
            fill(token, name, vals, present[name])
    return FeatureBlock(data=tokens, layout=layout)


def assemble_frame_input(observations: Sequence, target_mask: np.ndarray) -> np.ndarray:
    """Channel stack [x_0 ... x_{r-1}, M_tgt]: RGBA frames scaled to [0, 1]
    in round order, the binary mask last."""
    if not observations:
        raise ShapeMismatch("need at least one observation")
    shape = observations[0].image.shape
    planes = []
    for obs in observations:
        if obs.image.shape != shape:
            raise ShapeMismatch(f"frame shape {obs.image.shape} != {shape}")
        planes.append(obs.image.astype(np.float64).transpose(2, 0, 1) / 255.0)
    if target_mask.shape != shape[:2]:
        raise ShapeMismatch(f"mask shape {target_mask.shape} != {shape[:2]}")
    planes.append(target_mask.astype(np.float64)[None, :, :])
    return np.concatenate(planes, axis=0)


# -- frame encoder ---------------------------------------------------------------

@dataclass(frozen=True)
class Conv2dParams:
    weight: np.ndarray  # (out, in, kh, kw)
    bias: np.ndarray
    stride: int = 1


def conv2d(x: np.ndarray, p: Conv2dParams) -> np.ndarray:
    """Same-padded strided convolution on a (C, H, W) array."""
    out_c, in_c, kh, kw = p.weight.shape
    if x.shape[0] != in_c:
        raise ShapeMismatch(f"conv expects {in_c} channels, got {x.shape[0]}")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    win = win[:, ::p.stride, ::p.stride]
    return np.einsum("cijhw,ochw->oij", win, p.weight) + p.bias[:, None, None]


@dataclass(frozen=True)
class ResBlockParams:
    conv1: Conv2dParams
    conv2: Conv2dParams

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x + conv2d(gelu(conv2d(x, self.conv1)), self.conv2)


@dataclass(frozen=True)
class FrameEncoderParams:
    """Residual conv stack with stride-2 stages down to the declared output
    dims; the final 1x1 projection starts at zero."""

    in_channels: int
    out_channels: int
    in_hw: tuple[int, int]
    out_hw: tuple[int, int]
    stem: Conv2dParams
    stages: tuple
    proj: Conv2dParams

    @classmethod
    def create(cls, in_channels: int, out_channels: int, in_hw: tuple[int, int],
               out_hw: tuple[int, int], hidden: int = 16,
               seed: int = 0) -> "FrameEncoderParams":
        fh, fw = in_hw[0] / out_hw[0], in_hw[1] / out_hw[1]
        n_stages = int(round(np.log2(fh)))
        if fh != fw or 2 ** n_stages != fh:
            raise ShapeMismatch(
                f"output dims {out_hw} must divide input {in_hw} by a power of 2")
        rng = np.random.Generator(np.random.PCG64(seed))

        def conv(cin, cout, k, stride=1):
            fan_in = cin * k * k
            return Conv2dParams(weight=_uniform_fan_in(rng, fan_in, (cout, cin, k, k)),
                                bias=np.zeros(cout), stride=stride)

        stem = conv(in_channels, hidden, 3)
        stages = []
        for _ in range(n_stages):
            stages.append((conv(hidden, hidden, 3, stride=2),
                           ResBlockParams(conv(hidden, hidden, 3), conv(hidden, hidden, 3))))
        proj = Conv2dParams(weight=np.zeros((out_channels, hidden, 1, 1)),
                            bias=np.zeros(out_channels))
        return cls(in_channels=in_channels, out_channels=out_channels, in_hw=in_hw,
                   out_hw=out_hw, stem=stem, stages=tuple(stages), proj=proj)


def frame_encode(stack: np.ndarray, params: FrameEncoderParams) -> np.ndarray:
    """Encode a (C, H, W) stack to the declared (out_channels, h, w) feature
    map.  A freshly created encoder returns exactly zero."""
    if stack.shape != (params.in_channels, *params.in_hw):
        raise ShapeMismatch(
            f"stack shape {stack.shape} != {(params.in_channels, *params.in_hw)}")
    x = gelu(conv2d(stack, params.stem))
    for down, res in params.stages:
        x = gelu(conv2d(x, down))
        x = res.apply(x)
    out = conv2d(x, params.proj)
    if out.shape != (params.out_channels, *params.out_hw):
        raise ShapeMismatch(f"encoder produced {out.shape}, declared "
                            f"{(params.out_channels, *params.out_hw)}")
    return out
