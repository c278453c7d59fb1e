"""Attention kernels: gated operation self-attention, cross-round masked
context self-attention, and domain-keyed low-rank adapter application.

All kernels are pure float64 functions over (tokens, dim) arrays; the gates
(beta, tanh(gamma), lambda, the target mask and a zero-initialized adapter)
reproduce the ungated path exactly, not approximately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ShapeMismatch, UnknownTarget

MASK_NEG = -1.0e9

LORA_TARGETS = ("ctx_q", "ctx_k", "ctx_v")


def _uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass(frozen=True)
class AttentionParams:
    """Base self-attention projections, the newly injected (primed) context
    projections, and the gate scalars.  gamma and lambda start at 0 so fresh
    modules are exact no-ops; beta is the inference-time gain."""

    dim: int
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    ctx_q: np.ndarray
    ctx_k: np.ndarray
    ctx_v: np.ndarray
    gamma: float = 0.0
    lam: float = 0.0
    cond_proj_w: Optional[np.ndarray] = None
    cond_proj_b: Optional[np.ndarray] = None

    @classmethod
    def create(cls, dim: int, cond_dim: Optional[int] = None, seed: int = 0,
               gamma: float = 0.0, lam: float = 0.0) -> "AttentionParams":
        rng = np.random.Generator(np.random.PCG64(seed))
        mats = {name: _uniform_fan_in(rng, dim, (dim, dim))
                for name in ("w_q", "w_k", "w_v", "w_o", "ctx_q", "ctx_k", "ctx_v")}
        cond_w = cond_b = None
        if cond_dim is not None:
            cond_w = _uniform_fan_in(rng, cond_dim, (cond_dim, dim))
            cond_b = np.zeros(dim)
        return cls(dim=dim, gamma=gamma, lam=lam,
                   cond_proj_w=cond_w, cond_proj_b=cond_b, **mats)

    def to_named_arrays(self) -> dict:
        out = {"w_q": self.w_q, "w_k": self.w_k, "w_v": self.w_v, "w_o": self.w_o,
               "ctx_q": self.ctx_q, "ctx_k": self.ctx_k, "ctx_v": self.ctx_v,
               "gamma": np.array([self.gamma]), "lam": np.array([self.lam])}
        if self.cond_proj_w is not None:
            out["cond_proj_w"] = self.cond_proj_w
            out["cond_proj_b"] = self.cond_proj_b
        return out

    @classmethod
    def from_named_arrays(cls, arrays: dict) -> "AttentionParams":
        get = lambda k: np.asarray(arrays[k], np.float64)
        return cls(dim=get("w_q").shape[0],
                   w_q=get("w_q"), w_k=get("w_k"), w_v=get("w_v"), w_o=get("w_o"),
                   ctx_q=get("ctx_q"), ctx_k=get("ctx_k"), ctx_v=get("ctx_v"),
                   gamma=float(get("gamma")[0]), lam=float(get("lam")[0]),
                   cond_proj_w=get("cond_proj_w") if "cond_proj_w" in arrays else None,
                   cond_proj_b=get("cond_proj_b") if "cond_proj_b" in arrays else None)


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def self_attention(tokens: np.ndarray, params: AttentionParams) -> np.ndarray:
    """softmax(Q K^T / sqrt(d)) V followed by the output projection."""
    if tokens.ndim != 2 or tokens.shape[1] != params.dim:
        raise ShapeMismatch(f"tokens must be (T, {params.dim}), got {tokens.shape}")
    q = tokens @ params.w_q
    k = tokens @ params.w_k
    v = tokens @ params.w_v
    attn = softmax_rows(q @ k.T / math.sqrt(params.dim))
    return (attn @ v) @ params.w_o


def operation_self_attention(visual: np.ndarray, cond: np.ndarray,
                             params: AttentionParams, beta: float = 1.0) -> np.ndarray:
    """Gated injection of condition tokens: self-attention over the
    concatenated [visual, cond] sequence, truncated back to the visual
    tokens, added as beta * tanh(gamma) * (...)."""
    if visual.ndim != 2 or visual.shape[1] != params.dim:
        raise ShapeMismatch(f"visual tokens must be (T, {params.dim})")
    if params.cond_proj_w is not None:
        if cond.shape[1] != params.cond_proj_w.shape[0]:
            raise ShapeMismatch(
                f"condition dim {cond.shape[1]} != projector input "
                f"{params.cond_proj_w.shape[0]}")
        cond = cond @ params.cond_proj_w + params.cond_proj_b
    elif cond.shape[1] != params.dim:
        raise ShapeMismatch(f"condition dim {cond.shape[1]} != model dim {params.dim}")
    t = visual.shape[0]
    joint = np.concatenate([visual, cond], axis=0)
    truncated = self_attention(joint, params)[:t]
    return visual + (beta * math.tanh(params.gamma)) * truncated


def operation_self_attention_frames(frames: np.ndarray, cond: np.ndarray,
                                    params: AttentionParams,
                                    beta: float = 1.0) -> np.ndarray:
    """Broadcast the per-round condition tokens across the frame axis of a
    (F, T, d) block: every frame's visual tokens attend to the full condition
    sequence."""
    if frames.ndim != 3:
        raise ShapeMismatch(f"expected (F, T, d), got {frames.shape}")
    return np.stack([operation_self_attention(f, cond, params, beta) for f in frames])


def build_cross_round_mask(mask_cur: np.ndarray, mask_prev: np.ndarray) -> np.ndarray:
    """Additive (hw x hw) attention mask: entry [i, j] is 0 only when both
    Vec(M_r)[i] and Vec(M_{r-1})[j] lie inside the object region, else a
    large negative constant."""
    if mask_cur.shape != mask_prev.shape:
        raise ShapeMismatch(f"mask shapes differ: {mask_cur.shape} vs {mask_prev.shape}")
    cur = np.asarray(mask_cur, bool).reshape(-1)
    prev = np.asarray(mask_prev, bool).reshape(-1)
    allowed = cur[:, None] & prev[None, :]
    return np.where(allowed, 0.0, MASK_NEG)


def context_self_attention(tokens_cur: np.ndarray, tokens_prev: np.ndarray,
                           mask_cur: np.ndarray, mask_prev: np.ndarray,
                           target_mask: np.ndarray,
                           params: AttentionParams) -> np.ndarray:
    """Cross-round attention restricted to the edited object's region:
    v_r + lambda * M_tgt * softmax(A + Q' K'^T / sqrt(d)) V', where rows with
    a fully negative additive mask contribute exactly zero."""
    if tokens_cur.shape != tokens_prev.shape:
        raise ShapeMismatch(
            f"round token shapes differ: {tokens_cur.shape} vs {tokens_prev.shape}")
    if tokens_cur.ndim != 2 or tokens_cur.shape[1] != params.dim:
        raise ShapeMismatch(f"tokens must be (T, {params.dim}), got {tokens_cur.shape}")
    t = tokens_cur.shape[0]
    for name, mask in (("current", mask_cur), ("previous", mask_prev),
                       ("target", target_mask)):
        if mask.size != t:
            raise ShapeMismatch(f"{name} mask has {mask.size} cells for {t} tokens")

    additive = build_cross_round_mask(mask_cur, mask_prev)
    q = tokens_cur @ params.ctx_q
    k = tokens_prev @ params.ctx_k
    v = tokens_prev @ params.ctx_v
    scores = additive + q @ k.T / math.sqrt(params.dim)
    contrib = softmax_rows(scores) @ v
    dead = ~np.any(additive == 0.0, axis=1)
    contrib[dead] = 0.0
    gate = np.asarray(target_mask, np.float64).reshape(-1)
    return tokens_cur + params.lam * gate[:, None] * contrib


# -- domain LoRA -------------------------------------------------------------------

@dataclass(frozen=True)
class LoraAdapter:
    """One low-rank pair: W gains (alpha / rank) * up @ down."""

    down: np.ndarray  # (rank, dim)
    up: np.ndarray    # (dim, rank)
    rank: int
    alpha: float

    def delta(self) -> np.ndarray:
        return (self.alpha / self.rank) * (self.up @ self.down)


@dataclass(frozen=True)
class LoraAdapterSet:
    """Domain-keyed adapters targeting the context self-attention
    projections only; `up` factors start at zero so a fresh set is inert."""

    domain: str
    adapters: dict

    def __post_init__(self):
        for target, adapter in self.adapters.items():
            if target not in LORA_TARGETS:
                raise UnknownTarget(
                    f"LoRA target {target!r} not one of {LORA_TARGETS}")
            if adapter.rank < 1:
                raise ShapeMismatch(f"adapter rank {adapter.rank} must be >= 1")

    @classmethod
    def create(cls, domain: str, dim: int, rank: int = 4, alpha: float = 1.0,
               targets=LORA_TARGETS, seed: int = 0) -> "LoraAdapterSet":
        rng = np.random.Generator(np.random.PCG64(seed))
        adapters = {}
        for target in targets:
            adapters[target] = LoraAdapter(
                down=rng.normal(0.0, 1.0 / rank, size=(rank, dim)),
                up=np.zeros((dim, rank)),
                rank=rank, alpha=alpha)
        return cls(domain=domain, adapters=adapters)


def apply_lora(params: AttentionParams,
               adapters: Optional[LoraAdapterSet]) -> AttentionParams:
    """Merge adapters into the targeted weights; an absent set (the
    inference-time path) returns the parameters unchanged."""
    if adapters is None:
        return params
    updates = {}
    for target, adapter in adapters.adapters.items():
        base = getattr(params, target)
        if adapter.down.shape[1] != base.shape[1] or adapter.up.shape[0] != base.shape[0]:
            raise ShapeMismatch(
                f"adapter {target} factors {adapter.up.shape}x{adapter.down.shape} "
                f"do not fit weight {base.shape}")
        updates[target] = base + adapter.delta()
    return replace(params, **updates)
