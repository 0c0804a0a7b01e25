"""Binary classification metrics."""

import numpy as np

from .errors import SingleClassSplit


def roc_auc(scores, labels):
    """Area under the ROC curve by trapezoidal integration.

    Tied scores form one ROC step, so a tie between a positive and a negative
    contributes one half, exactly as in the Mann-Whitney statistic.  The area
    is accumulated in integers and divided once.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassSplit("AUC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends].astype(np.int64)
    fp = (ends + 1 - tp).astype(np.int64)
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * n_pos * n_neg)


def confusion(pred, labels):
    pred = np.asarray(pred).astype(bool)
    labels = np.asarray(labels).astype(bool)
    tp = int(np.sum(pred & labels))
    tn = int(np.sum(~pred & ~labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    return tp, tn, fp, fn


def classification_metrics(proba, labels):
    """ACC/AUC/SEN/SPE from class probabilities (S, 2) and integer labels."""
    proba = np.asarray(proba, dtype=np.float64)
    labels = np.asarray(labels)
    pred = np.argmax(proba, axis=1)
    tp, tn, fp, fn = confusion(pred, labels)
    n = tp + tn + fp + fn
    return {
        "acc": (tp + tn) / n,
        "auc": roc_auc(proba[:, 1], labels),
        "sen": tp / (tp + fn) if tp + fn else float("nan"),
        "spe": tn / (tn + fp) if tn + fp else float("nan"),
        "tp": tp, "tn": tn, "fp": fp, "fn": fn,
    }


def summarize(runs, keys=("acc", "auc", "sen", "spe")):
    """Mean and sample standard deviation per metric over repeats.

    A single repeat reports ``std = 0`` and sets ``single_repeat``.
    """
    out = {"repeats": len(runs), "single_repeat": len(runs) == 1}
    for k in keys:
        vals = np.array([r[k] for r in runs], dtype=np.float64)
        if np.all(vals == vals[0]):
            out[f"{k}_mean"], out[f"{k}_std"] = float(vals[0]), 0.0
            continue
        out[f"{k}_mean"] = float(vals.mean())
        out[f"{k}_std"] = float(vals.std(ddof=1))
    return out
