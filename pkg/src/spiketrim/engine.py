"""End-to-end forward pass with optional token reduction at one block.

forward_full runs patch embedding, every stage's entry transform and
attention blocks, applies the configured reduction at the insertion block,
mean-pools the final tokens over time and space, and maps the pooled feature
through the classifier head. Reduction details (scores, trajectories, masks
or merge assignments) can be captured for dumps and analysis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .backbone import (Model, downsample_tokens, patch_embed, ssa_forward,
                       token_logits)
from .efficiency import SopLedger
from .errors import ConfigError, ShapeError
from .selection import (KeepMask, MergeAssignment, Strategy, build_keep_mask,
                        build_merge_assignment, merged_ssa, pruned_ssa_batched)
from .tensors import DenseTensor, SpikeTensor, as_array
from .uncertainty import score_tokens, uncertainty_trajectories


@dataclass(frozen=True)
class ReductionPlan:
    strategy: Strategy
    keep_ratio: float = 1.0
    insert_block: Optional[str] = None  # None = model config default

    def __post_init__(self):
        if not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError(f"keep ratio {self.keep_ratio} outside (0, 1]")


@dataclass
class SelectionDetail:
    scores: Optional[DenseTensor] = None
    trajectories: Optional[np.ndarray] = None  # [T,B,N] float64
    masks: Optional[list[KeepMask]] = None
    assignments: Optional[list[MergeAssignment]] = None


@dataclass
class ForwardResult:
    logits: DenseTensor  # [B, C]
    stage_tokens: list[SpikeTensor]
    ledger: SopLedger
    selection: Optional[SelectionDetail] = None


def repeat_static(frames, steps: int):
    """Tile a single-step input [1,B,n,H,W] across the simulation steps."""
    arr = as_array(frames)
    if arr.ndim != 5 or arr.shape[0] != 1:
        raise ShapeError(f"static input must be [1,B,n,H,W], got {arr.shape}")
    tiled = np.ascontiguousarray(np.broadcast_to(arr, (steps,) + arr.shape[1:]))
    return SpikeTensor(tiled) if isinstance(frames, SpikeTensor) else DenseTensor(tiled)


def pool_tokens(x: SpikeTensor) -> DenseTensor:
    """Mean over time and tokens: [T,B,N,D] -> [B,D]."""
    return DenseTensor(x.data.astype(np.float64).mean(axis=(0, 2)).astype(np.float32))


def forward_full(model: Model, frames, reduction: Optional[ReductionPlan] = None,
                 ledger: Optional[SopLedger] = None,
                 capture: bool = False) -> ForwardResult:
    """Full inference pass. frames is [T0,B,n,H,W] with T0 == steps (event
    data) or T0 == 1 (static input, repeated across steps)."""
    cfg = model.config
    arr = as_array(frames)
    if arr.ndim != 5:
        raise ConfigError(f"input must be rank 5, got shape {arr.shape}")
    if arr.shape[2] != cfg.in_channels or arr.shape[3:] != (cfg.height, cfg.width):
        raise ConfigError(f"input {arr.shape} does not match config "
                          f"[{cfg.in_channels},{cfg.height},{cfg.width}]")
    if arr.shape[0] == 1 and cfg.steps > 1:
        frames = repeat_static(frames, cfg.steps)
    elif arr.shape[0] != cfg.steps:
        raise ConfigError(f"input steps {arr.shape[0]} != config steps {cfg.steps}")

    if ledger is None:
        ledger = SopLedger()
    plan = reduction
    active = plan is not None and plan.strategy.kind != "none" and plan.keep_ratio < 1.0
    prune_identity = (plan is not None and plan.strategy.kind != "none"
                      and plan.keep_ratio == 1.0
                      and plan.strategy.kind != "uncert_merge")
    ins_stage = ins_block = -1
    if capture or (plan is not None and plan.strategy.kind != "none"):
        spec_text = plan.insert_block if plan is not None else None
        ins_stage, ins_block = cfg.parse_insert(spec_text)

    x = patch_embed(frames, cfg.patch, model.embed_w, cfg.lif, ledger)
    detail = SelectionDetail() if (capture or active or prune_identity) else None
    stage_tokens: list[SpikeTensor] = []
    merged = False
    for s, st in enumerate(cfg.stages):
        if model.entries[s] is not None:
            if merged:
                raise ConfigError("downsampling after token merge is unsupported")
            grid = cfg.grid_at(s - 1)
            x = downsample_tokens(x, grid, st.downsample, model.entries[s],
                                  cfg.lif, ledger)
        for b_i, block in enumerate(model.blocks[s]):
            if (s, b_i) == (ins_stage, ins_block) and capture and detail is not None:
                # dumps always measure at the insertion block's input tokens
                detail.trajectories = uncertainty_trajectories(x, model.head)
            if (s, b_i) == (ins_stage, ins_block) and (active or prune_identity):
                x = _reduced_block(model, x, block, plan, ledger, detail)
                merged = plan.strategy.kind == "uncert_merge" and plan.keep_ratio < 1.0
            else:
                x = ssa_forward(x, block, ledger)
        stage_tokens.append(x)
    pooled = pool_tokens(x)
    logits = token_logits(pooled, model.head)
    return ForwardResult(logits=logits, stage_tokens=stage_tokens, ledger=ledger,
                         selection=detail)


def _reduced_block(model: Model, x: SpikeTensor, block, plan: ReductionPlan,
                   ledger: SopLedger, detail: Optional[SelectionDetail]) -> SpikeTensor:
    strat = plan.strategy
    needs_scores = strat.kind in ("uncert_prune", "uncert_merge", "low_uncert_prune")
    scores = None
    if needs_scores:
        scores = score_tokens(x, model.head, lam=strat.lam, mode=strat.score_mode)
    if detail is not None:
        detail.scores = scores
    if strat.kind == "uncert_merge":
        if plan.keep_ratio == 1.0:  # degenerate merge: keep every token as-is
            return ssa_forward(x, block, ledger)
        assignments = build_merge_assignment(scores, x, plan.keep_ratio)
        if detail is not None:
            detail.assignments = assignments
        return merged_ssa(x, assignments, block, model.config.lif, ledger)
    if strat.kind == "random_prune":
        b, n = x.shape[1], x.shape[2]
        dummy = DenseTensor(np.zeros((b, n), dtype=np.float32))
        masks = build_keep_mask(dummy, plan.keep_ratio, strat)
    else:
        masks = build_keep_mask(scores, plan.keep_ratio, strat)
    if detail is not None:
        detail.masks = masks
    return pruned_ssa_batched(x, masks, block, ledger)
