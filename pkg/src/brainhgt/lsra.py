"""Long-short range attention encoder.

Half of the heads see energies damped by a topological decay mask built from
hop distances; the other half attend globally.  All functions accept plain
arrays or :class:`~brainhgt.tensor.Tensor` and broadcast over leading batch
and head axes.
"""

import json
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import ShapeMismatch


def decay_multiplier(spl, hop, gamma_raw):
    """``sigmoid(gamma_raw) ** relu(spl - hop)``; equals 1 wherever ``spl <= hop``."""
    spl = T.as_tensor(spl)
    return T.power(T.sigmoid(gamma_raw), T.relu(T.sub(spl, hop)))


def _energies(q, k):
    q, k = T.as_tensor(q), T.as_tensor(k)
    return T.matmul(q, k.T) * (1.0 / np.sqrt(q.shape[-1]))


def modulate(energy, spl, hop, gamma_raw, mode="multiply"):
    """Apply the decay mask to raw energies.

    ``mode="multiply"`` is the Hadamard product with the mask (negative
    energies move toward zero).  ``mode="additive_log"`` adds the log-mask
    instead, which always lowers far-away scores.
    """
    if mode == "multiply":
        return T.mul(energy, decay_multiplier(spl, hop, gamma_raw))
    if mode == "additive_log":
        return T.add(energy, T.mul(T.relu(T.sub(spl, hop)), T.log(T.sigmoid(gamma_raw))))
    raise ValueError(f"unknown mask mode {mode!r}")


def long_range_head(q, k, v):
    """Scaled dot-product attention; returns ``softmax(q k^T / sqrt(d)) v``."""
    return T.matmul(T.softmax(_energies(q, k), axis=-1), v)


def short_range_head(q, k, v, spl, hop, gamma_raw, mode="multiply"):
    e = modulate(_energies(q, k), spl, hop, gamma_raw, mode)
    return T.matmul(T.softmax(e, axis=-1), v)


def split_heads(x, heads):
    """(..., N, d) -> (..., heads, N, d / heads)."""
    *lead, n, d = x.shape
    if d % heads:
        raise ShapeMismatch(f"width {d} not divisible by {heads} heads")
    x = T.reshape(x, (*lead, n, heads, d // heads))
    nd = len(lead)
    return T.transpose(x, (*range(nd), nd + 1, nd, nd + 2))


def merge_heads(x):
    """(..., heads, N, dh) -> (..., N, heads * dh), heads kept in order."""
    *lead, h, n, dh = x.shape
    nd = len(lead)
    x = T.transpose(x, (*range(nd), nd + 1, nd, nd + 2))
    return T.reshape(x, (*lead, n, h * dh))


def lsra_attention(x, spl, p, heads, local=True, mode="multiply", capture=None):
    """Multi-head LSRA over node features ``x`` of shape (B, N, d).

    ``p`` holds ``wq, wk, wv, wo`` (d x d) and per-short-head ``hop`` and
    ``gamma`` vectors.  Heads ``0 .. heads/2 - 1`` are short range.  With
    ``local=False`` every head attends globally.
    """
    q = split_heads(T.matmul(x, p["wq"]), heads)
    k = split_heads(T.matmul(x, p["wk"]), heads)
    v = split_heads(T.matmul(x, p["wv"]), heads)
    e = _energies(q, k)
    hs = heads // 2
    if local:
        s = T.as_tensor(np.asarray(T._data(spl))[:, None, :, :])
        hop = T.reshape(p["hop"], (1, hs, 1, 1))
        gamma = T.reshape(p["gamma"], (1, hs, 1, 1))
        short = modulate(e[:, :hs], s, hop, gamma, mode)
        e = T.concat([short, e[:, hs:]], axis=1)
    attn = T.softmax(e, axis=-1)
    if capture is not None:
        capture["short"] = attn.data[:, :hs].mean(axis=1)
        capture["long"] = attn.data[:, hs:].mean(axis=1)
    out = merge_heads(T.matmul(attn, v))
    return T.matmul(out, p["wo"])


def feed_forward(x, p):
    h = T.relu(T.add(T.matmul(x, p["w1"]), p["b1"]))
    return T.add(T.matmul(h, p["w2"]), p["b2"])


def lsra_forward(x, spl, p, heads, local=True, mode="multiply", dropout=0.0,
                 rng=None, training=False, capture=None):
    """One encoder layer: LSRA, residual + norm, FFN, residual + norm."""
    x = T.as_tensor(x)
    if x.ndim != 3 or x.shape[-1] != np.shape(T._data(p["wq"]))[0]:
        raise ShapeMismatch(f"node features {x.shape} incompatible with projections")
    a = lsra_attention(x, spl, p, heads, local, mode, capture)
    a = T.dropout(a, dropout, rng, training)
    h = T.layer_norm(T.add(x, a), p["ln1_w"], p["ln1_b"])
    f = T.dropout(feed_forward(h, p), dropout, rng, training)
    return T.layer_norm(T.add(h, f), p["ln2_w"], p["ln2_b"])


def export_attention(x, spl, p, heads, local=True, mode="multiply"):
    """Head-averaged post-softmax attention of each branch for one subject.

    ``x`` is (N, d) node features entering the layer, ``spl`` (N, N).
    Returns ``{"short": N x N, "long": N x N}``.
    """
    cap = {}
    with T.no_grad():
        lsra_attention(T.as_tensor(x)[None], np.asarray(spl)[None], p, heads, local, mode, cap)
    return {"short": cap["short"][0], "long": cap["long"][0]}


def write_attention(out_dir, subject_id, maps, heads):
    """CSV per branch plus a JSON index entry list."""
    from .io import write_matrix_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for branch, m in maps.items():
        name = f"attention_{branch}_{subject_id}.csv"
        write_matrix_csv(out / name, m)
        index.append({"subject_id": subject_id, "branch": branch, "head_count": heads // 2,
                      "file": name, "shape": list(m.shape)})
    (out / f"attention_{subject_id}.json").write_text(json.dumps(index, indent=2) + "\n")
    return index
