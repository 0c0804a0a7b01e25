"""Prior-guided soft clustering of ROIs into communities, community
refinement, readout, and the interpretability helpers built on them."""

import json
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import BadShape, EmptyGroup, EmptySet, ShapeMismatch
from .lsra import feed_forward, merge_heads, split_heads

PRIOR_FLOOR = 1e-3


def dice_prior(roi_voxels, network_voxels):
    """Dice overlap ``2|G ∩ F| / (|G| + |F|)`` for every ROI/network pair."""
    rois = [set(v) for v in roi_voxels]
    nets = [set(v) for v in network_voxels]
    for i, g in enumerate(rois):
        if not g:
            raise EmptySet(f"ROI {i} has no voxels")
    for k, f in enumerate(nets):
        if not f:
            raise EmptySet(f"network {k} has no voxels")
    out = np.zeros((len(rois), len(nets)))
    for i, g in enumerate(rois):
        for k, f in enumerate(nets):
            out[i, k] = 2.0 * len(g & f) / (len(g) + len(f))
    return out


def floor_empty_rows(prior, eps=PRIOR_FLOOR):
    """Replace all-zero prior rows with a uniform ``eps`` row."""
    prior = np.array(prior, dtype=np.float64, copy=True)
    if prior.ndim != 2:
        raise BadShape("prior must be an N x K matrix")
    if (prior < 0).any() or (prior > 1).any():
        raise ValueError("prior entries must lie in [0, 1]")
    prior[~prior.any(axis=1)] = eps
    return prior


def prior_cross_attention(protos, x_ls, prior, p, heads=1, sparse=True):
    """Community prototypes attend over ROI features, modulated by the prior.

    ``x_ls`` is (B, N, d), ``prior`` is (N, K) or (B, N, K).  Energies
    ``e[k, i]`` are multiplied by ``prior[i, k]`` and normalised over the
    communities of each ROI (1.5-entmax, or softmax when ``sparse`` is false).

    Returns ``(P, xc)``: the head-averaged assignment (B, N, K) as a Tensor
    and the community features (B, K, d).
    """
    x_ls = T.as_tensor(x_ls)
    prior = np.asarray(T._data(prior))
    b, n, d = x_ls.shape
    kc = T.as_tensor(protos).shape[0]
    if prior.shape[-2:] != (n, kc):
        raise ShapeMismatch(f"prior {prior.shape} does not match N={n}, K={kc}")
    q = split_heads(T.matmul(protos, p["wq"])[None], heads)      # (1, h, K, dh)
    k = split_heads(T.matmul(x_ls, p["wk"]), heads)               # (B, h, N, dh)
    v = split_heads(T.matmul(x_ls, p["wv"]), heads)
    dh = d // heads
    e = T.matmul(q, k.T) * (1.0 / np.sqrt(dh))                    # (B, h, K, N)
    mask = np.swapaxes(prior, -1, -2)
    mask = mask[None, None] if mask.ndim == 2 else mask[:, None]
    e = T.mul(e, mask)
    norm = T.entmax15 if sparse else T.softmax
    assign = norm(e, axis=-2)                                     # over communities
    xc = merge_heads(T.matmul(assign, v))                         # (B, K, d)
    P = T.swapaxes(T.mean(assign, axis=1), -1, -2)                # (B, N, K)
    return P, xc


def self_attention(x, p, heads, capture=None):
    q = split_heads(T.matmul(x, p["wq"]), heads)
    k = split_heads(T.matmul(x, p["wk"]), heads)
    v = split_heads(T.matmul(x, p["wv"]), heads)
    e = T.matmul(q, k.T) * (1.0 / np.sqrt(q.shape[-1]))
    attn = T.softmax(e, axis=-1)
    if capture is not None:
        capture["community"] = attn.data.mean(axis=1)
    return T.matmul(merge_heads(T.matmul(attn, v)), p["wo"])


def community_refine(xc, p, heads, dropout=0.0, rng=None, training=False, capture=None):
    """Self-attention over the K community rows, then an FFN, post-norm wrapped."""
    xc = T.as_tensor(xc)
    h = T.layer_norm(T.add(xc, self_attention(xc, p, heads, capture)), p["ln1_w"], p["ln1_b"])
    f = T.dropout(feed_forward(h, p), dropout, rng, training)
    return T.layer_norm(T.add(h, f), p["ln2_w"], p["ln2_b"])


def readout_classify(rows, p):
    """Mean-pool over rows, then the two-layer ReLU MLP to class logits."""
    pooled = T.mean(T.as_tensor(rows), axis=-2)
    hidden = T.relu(T.add(T.matmul(pooled, p["w1"]), p["b1"]))
    return T.add(T.matmul(hidden, p["w2"]), p["b2"])


def hard_labels(P):
    """Most probable community per ROI; ``np.argmax`` resolves ties to the lowest index."""
    return np.argmax(np.asarray(P), axis=-1)


def community_interaction_diff(group_a, group_b):
    """Mean K x K community attention of group A minus that of group B."""
    if len(group_a) == 0 or len(group_b) == 0:
        raise EmptyGroup("both groups need at least one matrix")
    return np.mean(np.asarray(group_a, dtype=np.float64), axis=0) - \
        np.mean(np.asarray(group_b, dtype=np.float64), axis=0)


def export_assignment(P, prior, out_dir, names=None):
    """Write ``assignment.csv``, ``prior.csv`` and ``hard_labels.json``."""
    from .io import write_matrix_csv

    P = np.asarray(P, dtype=np.float64)
    rows = P.sum(axis=1)
    if not np.allclose(rows, 1.0, atol=1e-9, rtol=0):
        raise ValueError("assignment rows must sum to 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = P.shape[1]
    header = list(names) if names is not None else [f"community_{i}" for i in range(k)]
    write_matrix_csv(out / "assignment.csv", P, header)
    write_matrix_csv(out / "prior.csv", prior, header)
    labels = hard_labels(P)
    (out / "hard_labels.json").write_text(json.dumps({"labels": labels.tolist()}) + "\n")
    return labels
