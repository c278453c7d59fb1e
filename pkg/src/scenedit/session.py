"""Buffered multi-round editing sessions.

A session keeps an append-only frame buffer (B_f, starting at the source
observation) and operation buffer (B_o).  Each submitted operation appends
one record and one frame; the history handed to the generator is truncated
to the newest N (observation, operation) pairs.  The generator is pluggable:
the oracle generator simulates and renders the hidden ground-truth state,
and a network-stub generator additionally pushes the history through the
conditioning and attention kernels to exercise the full data path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import attention, conditioning
from .assets import AssetStore
from .errors import GeneratorFailure, IllegalCommand, InvalidN, UnknownInstance
from .scene import (
    Observation,
    OperationCommand,
    OperationRecord,
    SceneState,
    apply_operation,
    bbox_coverage_mask,
    derive_source_region,
    normalize_bbox,
    render_state,
)

HistoryPair = tuple[Observation, OperationRecord]
# (truncated history, target mask at canvas resolution, noise seed) -> Observation
GeneratorFn = Callable[[list[HistoryPair], np.ndarray, int], Observation]


@dataclass
class SessionBuffers:
    """Frame/operation buffers plus the hidden simulator state that backs the
    oracle generator."""

    frames: list[Observation]
    ops: list[OperationRecord]
    max_history: int
    round_index: int = 0
    state: Optional[SceneState] = None
    store: Optional[AssetStore] = None
    state_history: list[SceneState] = field(default_factory=list)

    @property
    def canvas(self) -> tuple[int, int]:
        h, w = self.frames[0].image.shape[:2]
        return (w, h)


def create_session(source: Union[Observation, SceneState], max_history: int,
                   store: Optional[AssetStore] = None) -> SessionBuffers:
    """Initialize B_f = [x_0] and an empty B_o."""
    if max_history < 1:
        raise InvalidN(f"max history {max_history} must be >= 1")
    if isinstance(source, SceneState):
        if store is None:
            raise IllegalCommand("creating a session from a state needs an asset store")
        x0 = render_state(source, store)
        return SessionBuffers(frames=[x0], ops=[], max_history=max_history,
                              state=source, store=store, state_history=[source])
    return SessionBuffers(frames=[source], ops=[], max_history=max_history)


def truncate_history(pairs: list[HistoryPair], max_history: int) -> list[HistoryPair]:
    """Keep the newest `max_history` observation-operation pairs."""
    if len(pairs) <= max_history:
        return list(pairs)
    return list(pairs[len(pairs) - max_history:])


def submit_operation(buffers: SessionBuffers, cmd: OperationCommand,
                     generator: GeneratorFn, seed: int = 0,
                     target_bbox: Optional[tuple] = None) -> Observation:
    """One editing round: append the operation, assemble and truncate the
    history, invoke the generator, and retain only the produced frame."""
    latest = buffers.frames[-1]
    ann = latest.annotations.get(cmd.target_instance_id)
    if ann is None:
        raise UnknownInstance(
            f"instance {cmd.target_instance_id!r} not present in the latest frame")
    canvas = buffers.canvas
    source_bbox = normalize_bbox(ann.bbox_px_full, canvas)
    source_centroid = ((source_bbox[0] + source_bbox[2]) / 2.0,
                       (source_bbox[1] + source_bbox[3]) / 2.0)

    if buffers.state is not None:
        next_state = apply_operation(buffers.state, cmd, buffers.store)
        if target_bbox is None:
            _, target_bbox = derive_source_region(next_state, cmd.target_instance_id,
                                                  buffers.store)
    elif target_bbox is None:
        raise IllegalCommand("target_bbox is required for sessions without a state")

    record = OperationRecord(command=cmd, source_centroid=source_centroid,
                             source_bbox=tuple(source_bbox),
                             target_bbox=tuple(target_bbox),
                             round_index=buffers.round_index)
    buffers.ops.append(record)
    buffers.round_index += 1
    if buffers.state is not None:
        buffers.state = next_state
        buffers.state_history.append(next_state)

    pairs = list(zip(buffers.frames, buffers.ops))
    history = truncate_history(pairs, buffers.max_history)
    assert len(history) <= buffers.max_history

    width, height = canvas
    mask = bbox_coverage_mask(record.target_bbox, (height, width))
    try:
        frame = generator(history, mask, seed)
    except Exception as exc:
        raise GeneratorFailure(f"generator failed: {exc}") from exc
    if frame.image.shape != latest.image.shape:
        raise GeneratorFailure(
            f"generator produced {frame.image.shape}, expected {latest.image.shape}")
    buffers.frames.append(frame)
    return frame


# -- generators -----------------------------------------------------------------

def oracle_generator(buffers: SessionBuffers) -> GeneratorFn:
    """Deterministic simulate-and-render stand-in for the out-of-scope
    diffusion sampler: ignores the history and renders the hidden state."""
    if buffers.state is None:
        raise IllegalCommand("the oracle generator needs a session with a hidden state")

    def generate(history, target_mask, seed):
        return render_state(buffers.state, buffers.store)

    return generate


def network_stub_generator(buffers: SessionBuffers, feature_dim: int = 32,
                           grid: int = 16, embed_dim: int = 32,
                           seed: int = 0) -> GeneratorFn:
    """Runs the conditioning and attention kernels end-to-end on downsampled
    features purely to exercise the data path, then returns the oracle
    frame."""
    if buffers.state is None:
        raise IllegalCommand("the network stub needs a session with a hidden state")
    enc_params = conditioning.EncoderParams.create(embed_dim=embed_dim, seed=seed)
    attn_params = attention.AttentionParams.create(
        dim=feature_dim, cond_dim=7 * embed_dim, seed=seed, gamma=0.1, lam=0.1)

    def generate(history, target_mask, noise_seed):
        state = buffers.state
        records = [rec for _, rec in history]
        tokens = conditioning.assemble_operation_tokens(
            records, enc_params, state.canvas, state.domain)
        observations = [obs for obs, _ in history]
        stack = conditioning.assemble_frame_input(observations, target_mask)
        height, width = observations[0].image.shape[:2]
        fe = conditioning.FrameEncoderParams.create(
            in_channels=stack.shape[0], out_channels=feature_dim,
            in_hw=(height, width), out_hw=(grid, grid), seed=seed)
        fmap = conditioning.frame_encode(stack, fe)
        visual = fmap.reshape(feature_dim, grid * grid).T  # (grid^2, d)

        cur_rec = records[-1]
        tgt_grid = bbox_coverage_mask(cur_rec.target_bbox, (grid, grid))
        src_grid = bbox_coverage_mask(cur_rec.source_bbox, (grid, grid))
        ctx = attention.context_self_attention(
            visual, visual, tgt_grid, src_grid, tgt_grid, attn_params)
        attention.operation_self_attention(ctx, tokens.data[0], attn_params, beta=1.0)
        return render_state(state, buffers.store)

    return generate
