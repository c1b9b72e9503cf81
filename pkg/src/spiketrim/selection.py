"""Token selection: uncertainty-guided pruning and merging plus the random
and low-uncertainty baselines.

A keep mask is derived once per sample from temporally aggregated scores and
shared across all timesteps. Pruned positions are frozen (identity
pass-through): they receive no attention update and no residual
recomputation, which makes keep-everything selection exactly the unreduced
block.

Merging assigns every non-anchor token to its most cosine-similar anchor
(time-averaged features; an all-zero feature has similarity 0 by definition)
and combines each group with normalized exponential weights, anchor included
at self-similarity 1. The merged tokens are real-valued and are re-binarized
by a LIF front end before the attention block consumes them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backbone import SsaBlockWeights, ssa_forward
from .efficiency import SopLedger
from .errors import ShapeError
from .neuron import LifParams, lif_sequence
from .rng import stream
from .tensors import DenseTensor, SpikeTensor, gather_tokens, scatter_tokens, topk_indices

STRATEGY_KINDS = ("uncert_prune", "uncert_merge", "random_prune",
                  "low_uncert_prune", "none")


@dataclass(frozen=True)
class Strategy:
    """Which ordering drives selection; seed feeds the random baseline only."""

    kind: str = "none"
    lam: float = 0.9
    seed: int = 0
    score_mode: str = "full"

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass(frozen=True)
class KeepMask:
    keep_indices: tuple[int, ...]
    n_total: int
    ratio: float

    def __post_init__(self):
        expected = math.floor(self.ratio * self.n_total)
        if len(self.keep_indices) != expected:
            raise ValueError(f"mask keeps {len(self.keep_indices)}, expected {expected}")
        if list(self.keep_indices) != sorted(set(self.keep_indices)):
            raise ValueError("keep indices must be strictly increasing")


@dataclass(frozen=True)
class MergeAssignment:
    """anchors ascending; assign maps each non-anchor to its anchor; weights
    maps each anchor to the normalized weights over [anchor] + its members
    (member order: anchor first, then assigned tokens ascending)."""

    anchors: tuple[int, ...]
    assign: dict[int, int]
    weights: dict[int, tuple[float, ...]]

    def members(self, anchor: int) -> list[int]:
        return [anchor] + sorted(j for j, a in self.assign.items() if a == anchor)


def n_keep(ratio: float, n_total: int) -> int:
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"keep ratio {ratio} outside (0, 1]")
    k = math.floor(ratio * n_total)
    if k < 1:
        raise ValueError(f"floor({ratio} * {n_total}) keeps no tokens")
    return k


def build_keep_mask(scores: DenseTensor, ratio: float, strategy: Strategy) -> list[KeepMask]:
    """Per-sample keep masks from [B, N] scores.

    uncert_prune keeps top scores, low_uncert_prune keeps top negated scores,
    random_prune draws a seeded sample without replacement (stream keyed by
    (strategy.seed, sample position), so masks are per-sample independent and
    reproducible).
    """
    if len(scores.shape) != 2:
        raise ShapeError(f"scores must be [B, N], got {scores.shape}")
    b, n = scores.shape
    k = n_keep(ratio, n)
    masks = []
    for m in range(b):
        if strategy.kind in ("uncert_prune", "uncert_merge"):
            idx = topk_indices(scores.data[m], k)
        elif strategy.kind == "low_uncert_prune":
            idx = topk_indices(-scores.data[m].astype(np.float64), k)
        elif strategy.kind == "random_prune":
            idx = stream(strategy.seed, f"random_prune/{m}").sample_without_replacement(n, k)
            idx = [int(i) for i in idx]
        else:
            raise ValueError(f"strategy {strategy.kind!r} builds no keep mask")
        masks.append(KeepMask(tuple(idx), n_total=n, ratio=ratio))
    return masks


def pruned_ssa(x: SpikeTensor, mask: KeepMask, w: SsaBlockWeights,
               ledger: Optional[SopLedger] = None) -> SpikeTensor:
    """Attention restricted to kept tokens; pruned rows pass through unchanged."""
    if mask.n_total != x.shape[2]:
        raise ShapeError(f"mask for N={mask.n_total} applied to N={x.shape[2]}")
    gathered = gather_tokens(x, mask.keep_indices)
    updated = ssa_forward(gathered, w, ledger)
    return scatter_tokens(updated, mask.keep_indices, x)


def pruned_ssa_batched(x: SpikeTensor, masks: Sequence[KeepMask], w: SsaBlockWeights,
                       ledger: Optional[SopLedger] = None) -> SpikeTensor:
    """Per-sample masks in one vectorized pass.

    Bitwise-identical to looping pruned_ssa over single-sample slices: the
    gathered tensor is processed elementwise per batch entry, and all matmul
    operands are exact, so batching cannot change any value.
    """
    t, b, n, d = x.shape
    if len(masks) != b:
        raise ShapeError(f"{len(masks)} masks for batch {b}")
    k = len(masks[0].keep_indices)
    if any(len(m.keep_indices) != k for m in masks):
        raise ShapeError("masks must keep equal counts")
    idx = np.array([m.keep_indices for m in masks], dtype=np.int64)  # [B, k]
    expand = np.broadcast_to(idx[None, :, :, None], (t, b, k, d))
    gathered = SpikeTensor(np.take_along_axis(x.data, expand, axis=2))
    updated = ssa_forward(gathered, w, ledger)
    out = np.array(x.data)
    np.put_along_axis(out, expand, updated.data, axis=2)
    return SpikeTensor(out)


def _time_averaged(features_sample: np.ndarray) -> np.ndarray:
    return features_sample.astype(np.float64).mean(axis=0)  # [N, D]


def build_merge_assignment(scores: DenseTensor, features: SpikeTensor,
                           ratio: float, lam_unused: float = 0.9) -> list[MergeAssignment]:
    """Anchors = top-score tokens; each non-anchor joins its most similar
    anchor by cosine of time-averaged features (ties to the smaller anchor
    index, all-zero features have cosine 0); per-anchor weights are normalized
    exponentials of similarity with anchor self-similarity 1."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"merge ratio {ratio} must lie in (0, 1)")
    b, n = scores.shape
    if features.shape[1] != b or features.shape[2] != n:
        raise ShapeError(f"features {features.shape} vs scores {scores.shape}")
    k = n_keep(ratio, n)
    out = []
    for m in range(b):
        anchors = topk_indices(scores.data[m], k)
        zbar = _time_averaged(features.data[:, m])  # [N, D]
        norms = np.sqrt((zbar**2).sum(axis=-1))
        anchor_arr = np.array(anchors, dtype=np.int64)
        assign: dict[int, int] = {}
        anchor_set = set(anchors)
        for j in range(n):
            if j in anchor_set:
                continue
            if norms[j] == 0.0:
                sims = np.zeros(len(anchors))
            else:
                dots = zbar[anchor_arr] @ zbar[j]
                dens = norms[anchor_arr] * norms[j]
                sims = np.where(dens > 0.0, dots / np.where(dens > 0.0, dens, 1.0), 0.0)
            assign[j] = int(anchor_arr[int(np.argmax(sims))])  # argmax tie -> smaller anchor
        weights: dict[int, tuple[float, ...]] = {}
        for a in anchors:
            group = [a] + sorted(j for j, t in assign.items() if t == a)
            sims = []
            for j in group:
                if j == a:
                    sims.append(1.0)
                elif norms[j] == 0.0 or norms[a] == 0.0:
                    sims.append(0.0)
                else:
                    sims.append(float(zbar[a] @ zbar[j] / (norms[a] * norms[j])))
            expw = np.exp(np.asarray(sims, dtype=np.float64))
            expw /= expw.sum()
            weights[a] = tuple(float(v) for v in expw)
        out.append(MergeAssignment(anchors=tuple(anchors), assign=assign, weights=weights))
    return out


def apply_merge(x: SpikeTensor, assignments: Sequence[MergeAssignment],
                ledger: Optional[SopLedger] = None,
                label: str = "merge") -> DenseTensor:
    """Weighted token combination: [T,B,N,D] -> real [T,B,K,D].

    Weights are time-independent; merged token i at time t is the convex
    combination of its members' spikes at t. Each weighted add is charged as
    a dense MAC.
    """
    t, b, n, d = x.shape
    if len(assignments) != b:
        raise ShapeError(f"{len(assignments)} assignments for batch {b}")
    k = len(assignments[0].anchors)
    out = np.zeros((t, b, k, d), dtype=np.float64)
    macs = 0
    for m, a in enumerate(assignments):
        if len(a.anchors) != k:
            raise ShapeError("assignments must keep equal anchor counts")
        xm = x.data[:, m].astype(np.float64)  # [T,N,D]
        for ai, anchor in enumerate(a.anchors):
            group = a.members(anchor)
            w = np.asarray(a.weights[anchor], dtype=np.float64)
            out[:, m, ai] = np.einsum("j,tjd->td", w, xm[:, group])
            macs += t * len(group) * d
    if ledger is not None:
        ledger.add(label, dense_macs=macs)
    return DenseTensor(out.astype(np.float32))


def merged_ssa(x: SpikeTensor, assignments: Sequence[MergeAssignment],
               w: SsaBlockWeights, lif: LifParams,
               ledger: Optional[SopLedger] = None) -> SpikeTensor:
    """Merge, re-binarize through a LIF front end, then run the block on the
    reduced token set. Output has K tokens; downstream layers see fewer rows."""
    merged = apply_merge(x, assignments, ledger, label=f"{w.label}.merge")
    binary = lif_sequence(lif, merged.data.astype(np.float64))
    return ssa_forward(binary, w, ledger)


def mask_csv(masks: Sequence[KeepMask] | None,
             assignments: Sequence[MergeAssignment] | None, n: int) -> str:
    """CSV dump `sample,token,kept,anchor`; anchor is the merge target for
    merged tokens, the token itself when kept, and -1 for pruned tokens."""
    lines = ["sample,token,kept,anchor"]
    if masks is not None:
        for m, mask in enumerate(masks):
            kept = set(mask.keep_indices)
            for i in range(n):
                lines.append(f"{m},{i},{1 if i in kept else 0},{i if i in kept else -1}")
    elif assignments is not None:
        for m, a in enumerate(assignments):
            anchor_set = set(a.anchors)
            for i in range(n):
                if i in anchor_set:
                    lines.append(f"{m},{i},1,{i}")
                else:
                    lines.append(f"{m},{i},0,{a.assign[i]}")
    return "\n".join(lines) + "\n"
