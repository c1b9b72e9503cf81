"""Self-contained oracle suite: every closed-form example the engine must
reproduce, with expected values frozen from independent derivations (hand
evaluation of the recurrences, scalar re-implementations, counting rules).

Each check prints one PASS/FAIL line; run time is well under five seconds.
"""
from __future__ import annotations

import math

import numpy as np

from .backbone import HeadWeights, ModelConfig, attention_core, init_model, token_logits
from .data import SyntheticSpec, synth_dataset
from .efficiency import (EnergyModel, SopLedger, count_attention, count_linear,
                         energy_mj, reduction_percent)
from .engine import forward_full
from .head import pool_features, ridge_solve
from .neuron import LifParams, LifState, lif_sequence, lif_step
from .selection import Strategy, apply_merge, build_keep_mask, build_merge_assignment
from .tensors import (DenseTensor, SpikeTensor, flatten_spatial, gather_tokens,
                      reduce_mean_std, scatter_tokens, spike_dense_matmul,
                      topk_indices)
from .uncertainty import (evidence_from_logits, importance_score, score_tokens,
                          trajectory_stats, uncertainty_from_evidence)

TOL = 1e-6


def _close(a, b, tol=TOL):
    assert abs(a - b) <= tol, f"{a!r} != {b!r} (tol {tol})"


def check_softplus_ln2():
    e = evidence_from_logits(np.array([0.0]))
    _close(e.data[0].item(), 0.6931472)
    lo = evidence_from_logits(np.array([-40.0]))
    assert 0.0 <= lo.data[0].item() < 1e-17
    hi = evidence_from_logits(np.array([40.0]))
    _close(hi.data[0].item(), 40.0)


def check_uncertainty_zero_logits():
    e = evidence_from_logits(np.zeros(10))
    u = uncertainty_from_evidence(e)
    _close(u.data.item(), 0.5906161)
    u_zero = uncertainty_from_evidence(np.zeros(10))
    _close(u_zero.data.item(), 1.0)
    e2 = evidence_from_logits(np.array([40.0, -40.0]))
    _close(uncertainty_from_evidence(e2).data.item(), 2.0 / 42.0, tol=1e-4)


def check_trajectory_stats():
    st = trajectory_stats([0.2, 0.4, 0.6, 0.8])
    _close(st.mu, 0.5)
    _close(st.sigma, 0.2236068)
    flat = trajectory_stats([0.3, 0.3, 0.3])
    _close(flat.mu, 0.3)
    _close(flat.sigma, 0.0)
    single = trajectory_stats([0.42])
    _close(single.mu, 0.42)
    _close(single.sigma, 0.0)


def check_importance_score():
    st = trajectory_stats([0.2, 0.4, 0.6, 0.8])
    _close(importance_score(st, 0.9), 0.7012461)
    _close(importance_score(st, 0.0), st.mu)


def check_lif_train():
    params = LifParams(tau=0.5, v_th=1.0)
    currents = np.full((4, 1), 0.6)
    spikes = lif_sequence(params, currents)
    assert spikes.data[:, 0].tolist() == [0, 0, 1, 0], spikes.data[:, 0].tolist()


def check_lif_leak():
    params = LifParams(tau=0.5, v_th=1.0)
    state = LifState(params=params, membrane=np.array([0.8]))
    for _ in range(2):
        spikes = lif_step(state, np.zeros(1))
        assert spikes.nnz == 0
    _close(float(state.membrane[0]), 0.2)


def check_lif_boundary():
    params = LifParams(tau=0.5, v_th=1.0)
    state = LifState.zeros(params, (3,))
    spikes = lif_step(state, np.full(3, 1.0))
    assert spikes.data.tolist() == [1, 1, 1]
    assert (state.membrane == 0.0).all()


def check_topk():
    assert topk_indices([0.9, 0.1, 0.5, 0.5, 0.3], 3) == [0, 2, 3]
    assert topk_indices([0.5, 0.5, 0.5, 0.1], 2) == [0, 1]
    assert topk_indices([0.1, 0.2, 0.3], 3) == [0, 1, 2]


def check_flatten_index():
    x = np.zeros((4, 1, 3, 2, 3), dtype=np.uint8)
    x[0, 0, 2, 1, 0] = 1
    flat = flatten_spatial(SpikeTensor(x))
    assert flat.shape == (4, 1, 6, 3)
    assert flat.data[0, 0, 3, 2] == 1 and flat.nnz == 1


def check_gather_scatter_roundtrip():
    rng = np.random.default_rng(7)
    x = SpikeTensor((rng.random((3, 2, 6, 4)) < 0.4).astype(np.uint8))
    idx = [1, 3, 4]
    assert (scatter_tokens(gather_tokens(x, idx), idx, x).data == x.data).all()
    base = SpikeTensor(np.zeros((1, 1, 4, 2), dtype=np.uint8))
    src = SpikeTensor(np.ones((1, 1, 2, 2), dtype=np.uint8))
    out = scatter_tokens(src, [1, 3], base)
    assert out.data[0, 0].tolist() == [[0, 0], [1, 1], [0, 0], [1, 1]]


def check_spike_matmul_ops():
    a = SpikeTensor(np.array([[1, 0, 1, 1]], dtype=np.uint8))
    w = DenseTensor(np.arange(32, dtype=np.float32).reshape(4, 8) / 16)
    ledger = SopLedger()
    out = spike_dense_matmul(a, w, ledger, label="x")
    assert ledger.entries["x"] == (24, 0)
    expect = a.data.astype(np.float64) @ w.data.astype(np.float64)
    assert (out.data == expect.astype(np.float32)).all()


def check_reduce_mean_std():
    mean, std = reduce_mean_std([0.2, 0.4, 0.6, 0.8])
    _close(mean, 0.5)
    _close(std, 0.2236068)


def check_attention_core():
    q = np.array([[[1.0, 1.0]]])
    a, y = attention_core(q, q, q)
    assert a.tolist() == [[[2.0]]]
    assert y.tolist() == [[[2.0, 2.0]]]


def check_token_logits_rows():
    head = HeadWeights(
        DenseTensor(np.array([[1, 2], [4, 8], [16, 32]], dtype=np.float32)),
        DenseTensor(np.zeros(2, dtype=np.float32)),
    )
    z = SpikeTensor(np.array([1, 0, 1], dtype=np.uint8))
    logits = token_logits(z, head)
    assert logits.data.tolist() == [17.0, 34.0]


def check_low_uncert_keep():
    scores = DenseTensor(np.array([[0.9, 0.1, 0.5, 0.5, 0.3]], dtype=np.float32))
    masks = build_keep_mask(scores, 0.6, Strategy(kind="low_uncert_prune"))
    assert list(masks[0].keep_indices) == [1, 2, 4]
    masks_hi = build_keep_mask(scores, 0.6, Strategy(kind="uncert_prune"))
    assert list(masks_hi[0].keep_indices) == [0, 2, 3]


def check_merge_weights():
    # anchor [1,0], one member [0,1]: similarities (1, 0) -> softmax weights
    feats = np.zeros((1, 1, 2, 2), dtype=np.uint8)
    feats[0, 0, 0] = [1, 0]
    feats[0, 0, 1] = [0, 1]
    scores = DenseTensor(np.array([[1.0, 0.0]], dtype=np.float32))
    assign = build_merge_assignment(scores, SpikeTensor(feats), 0.5)[0]
    assert assign.anchors == (0,) and assign.assign == {1: 0}
    w = assign.weights[0]
    _close(w[0], 0.7310586)
    _close(w[1], 0.2689414)
    merged = apply_merge(SpikeTensor(feats), [assign])
    _close(float(merged.data[0, 0, 0, 0]), 0.7310586)
    _close(float(merged.data[0, 0, 0, 1]), 0.2689414)


def check_counting_rules():
    assert count_linear(4, 8) == 32
    assert count_linear(0, 8) == 0
    assert count_attention(3, 4, 2) == (12, 32)
    assert count_attention(0, 4, 2) == (0, 32)
    assert count_attention(5, 1, 2) == (5, 2)


def check_energy_units():
    ledger = SopLedger()
    ledger.add("net", spike_accumulates=10**9)
    _close(energy_mj(ledger, EnergyModel(pj_per_op=0.9)), 0.9, tol=1e-9)
    _close(reduction_percent(100, 90), 10.0, tol=1e-9)
    assert round(reduction_percent(1.233e9, 1.050e9), 2) == 14.84


def check_ridge_normal_equations():
    w, b = ridge_solve(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]), 0.0)
    _close(float(w[0, 0]), 1.0, tol=1e-9)
    _close(float(b[0]), 0.0, tol=1e-9)


def check_pool_single_spike():
    x = np.zeros((2, 1, 3, 4), dtype=np.uint8)
    x[1, 0, 2, 1] = 1
    pooled = pool_features(SpikeTensor(x))
    _close(float(pooled.data[0, 1]), 1.0 / 6.0)
    assert float(np.abs(pooled.data).sum()) - float(pooled.data[0, 1]) == 0.0


def check_score_scalar_oracle():
    # vectorized score_tokens vs a direct scalar-loop re-derivation
    rng = np.random.default_rng(11)
    tokens = SpikeTensor((rng.random((3, 2, 4, 5)) < 0.5).astype(np.uint8))
    head = HeadWeights(
        DenseTensor(rng.normal(size=(5, 3)).astype(np.float32)),
        DenseTensor(rng.normal(size=3).astype(np.float32)),
    )
    scores = score_tokens(tokens, head, lam=0.9)
    for b in range(2):
        for i in range(4):
            traj = []
            for t in range(3):
                logits = [float(sum(float(tokens.data[t, b, i, k]) * float(head.w.data[k, c])
                                    for k in range(5)) + float(head.b.data[c]))
                          for c in range(3)]
                ev = [math.log1p(math.exp(-abs(l))) + max(l, 0.0) for l in logits]
                traj.append(3.0 / (3.0 + sum(ev)))
            mu = sum(traj) / 3.0
            sigma = math.sqrt(sum((u - mu) ** 2 for u in traj) / 3.0)
            _close(float(scores.data[b, i]), mu + 0.9 * sigma, tol=1e-5)


def check_forward_determinism():
    spec = SyntheticSpec(train_samples=8, test_samples=8)
    _, test = synth_dataset(spec, 3)
    cfg = ModelConfig(seed=3)
    logits_a = forward_full(init_model(cfg), test.frames).logits
    logits_b = forward_full(init_model(cfg), test.frames).logits
    assert logits_a.data.tobytes() == logits_b.data.tobytes()


CHECKS = [
    ("softplus ln2 and limits", check_softplus_ln2),
    ("uncertainty of zero logits", check_uncertainty_zero_logits),
    ("trajectory mean/std", check_trajectory_stats),
    ("importance score", check_importance_score),
    ("lif spike train 0,0,1,0", check_lif_train),
    ("lif leak law", check_lif_leak),
    ("lif threshold boundary", check_lif_boundary),
    ("topk tie-breaking", check_topk),
    ("flatten spatial index map", check_flatten_index),
    ("gather/scatter round-trip", check_gather_scatter_roundtrip),
    ("spike matmul ops and values", check_spike_matmul_ops),
    ("reduce mean/std", check_reduce_mean_std),
    ("attention core hand matmul", check_attention_core),
    ("token logits row sums", check_token_logits_rows),
    ("keep-mask tie cases", check_low_uncert_keep),
    ("merge weights two-way softmax", check_merge_weights),
    ("op counting rules", check_counting_rules),
    ("energy unit conversion", check_energy_units),
    ("ridge normal equations", check_ridge_normal_equations),
    ("pooling single spike", check_pool_single_spike),
    ("score scalar-loop oracle", check_score_scalar_oracle),
    ("forward determinism", check_forward_determinism),
]


def run_selftest(out=print) -> int:
    """Run all oracle checks; returns the number of failures."""
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
            out(f"PASS {name}")
        except Exception as exc:  # report and continue
            failures += 1
            out(f"FAIL {name}: {exc}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} oracle checks passed")
    return failures
