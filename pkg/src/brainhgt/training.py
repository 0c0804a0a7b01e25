"""Training protocol, repeated evaluation, ablations and sweeps."""

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import tensor as T
from .data import prepare
from .errors import BadConfig, Diverged
from .metrics import classification_metrics, roc_auc, summarize
from .model import BrainHGT, ModelConfig
from .nn import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    weight_decay: float = 1e-4
    seed: int = 0

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise BadConfig(f"unknown training options: {sorted(extra)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass
class SplitProtocol:
    train_frac: float = 0.70
    val_frac: float = 0.10
    test_frac: float = 0.20
    repeats: int = 10
    seeds: list = field(default_factory=lambda: list(range(10)))

    def validate(self):
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise BadConfig("split fractions must sum to 1")
        if len(self.seeds) != self.repeats:
            raise BadConfig("need exactly one seed per repeat")
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise BadConfig(f"unknown split options: {sorted(extra)}")
        data = dict(data)
        if "seeds" not in data:
            data["seeds"] = list(range(data.get("repeats", 10)))
        return cls(**data).validate()

    def to_dict(self):
        return asdict(self)


def stratified_split(labels, protocol, seed):
    """Disjoint, exhaustive train/val/test index arrays, stratified by class."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    parts = ([], [], [])
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        n = len(idx)
        n_val = int(round(protocol.val_frac * n))
        n_test = int(round(protocol.test_frac * n))
        n_train = n - n_val - n_test
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


@dataclass
class TrainResult:
    params: dict
    history: list
    best_epoch: int
    best_val_auc: float
    model_cfg: ModelConfig


def _batches(n, size, rng):
    order = rng.permutation(n)
    return [order[i:i + size] for i in range(0, n, size)]


def predict(model, gs, batch_size=64):
    """Class probabilities for every subject of a :class:`GraphSet`."""
    out = []
    with T.no_grad():
        for start in range(0, len(gs), batch_size):
            sl = slice(start, start + batch_size)
            logits = model.forward(gs.corr[sl], gs.spl[sl], gs.prior).data
            out.append(T.softmax_np(logits, axis=-1))
    return np.concatenate(out) if out else np.zeros((0, model.cfg.n_classes))


def _val_auc(model, gs):
    return roc_auc(predict(model, gs)[:, 1], gs.labels)


def train(model_cfg, train_set, val_set, train_cfg=None, variant=None, init_params=None):
    """Cross-entropy training with Adam; keeps the best-validation-AUC epoch.

    Ties in validation AUC keep the earliest epoch.  With ``epochs == 0`` the
    initial parameters are returned after one validation pass.
    """
    train_cfg = train_cfg or TrainConfig()
    if variant is not None:
        model_cfg = replace(model_cfg, variant=variant)
    model = BrainHGT(model_cfg, params=init_params, seed=train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed + 1_000_003)
    state = AdamState(lr=train_cfg.lr, weight_decay=train_cfg.weight_decay)
    history = []
    if train_cfg.epochs == 0:
        auc = _val_auc(model, val_set)
        history.append({"epoch": 0, "loss": float("nan"), "val_auc": auc})
        return TrainResult(model.state_dict(), history, 0, auc, model_cfg)
    best = (-math.inf, None, None)
    params = model.trainable()
    for epoch in range(1, train_cfg.epochs + 1):
        losses = []
        for idx in _batches(len(train_set), train_cfg.batch_size, rng):
            logits = model.forward(train_set.corr[idx], train_set.spl[idx], train_set.prior,
                                   training=True, rng=rng)
            loss = T.cross_entropy(logits, train_set.labels[idx])
            if not np.isfinite(loss.data):
                raise Diverged(f"non-finite loss at epoch {epoch}")
            for t in params.values():
                t.grad = None
            loss.backward()
            adam_step({k: t.data for k, t in params.items()},
                      {k: t.grad for k, t in params.items() if t.grad is not None}, state)
            losses.append(float(loss.data) * len(idx))
        auc = _val_auc(model, val_set)
        mean_loss = sum(losses) / len(train_set)
        history.append({"epoch": epoch, "loss": mean_loss, "val_auc": auc})
        log.debug("epoch %d loss %.6f val_auc %.4f", epoch, mean_loss, auc)
        if auc > best[0]:
            best = (auc, epoch, model.state_dict())
    return TrainResult(best[2], history, best[1], best[0], model_cfg)


def evaluate(model_or_result, test_set):
    """Metrics of a trained model (or :class:`TrainResult`) on a test set."""
    model = model_or_result
    if isinstance(model_or_result, TrainResult):
        model = BrainHGT(model_or_result.model_cfg, params=model_or_result.params)
    return classification_metrics(predict(model, test_set), test_set.labels)


def run_single(model_cfg, gs, protocol, seed, train_cfg=None, variant=None):
    tr, va, te = stratified_split(gs.labels, protocol, seed)
    train_cfg = replace(train_cfg or TrainConfig(), seed=seed)
    result = train(model_cfg, gs.subset(tr), gs.subset(va), train_cfg, variant)
    metrics = evaluate(result, gs.subset(te))
    metrics.update(seed=seed, best_epoch=result.best_epoch, best_val_auc=result.best_val_auc)
    return metrics, result


def run_repeats(model_cfg, gs, protocol, train_cfg=None, variant=None):
    """Independent resplit-and-retrain per seed; returns (per-repeat rows, summary)."""
    protocol.validate()
    rows = []
    for seed in protocol.seeds:
        metrics, _ = run_single(model_cfg, gs, protocol, seed, train_cfg, variant)
        rows.append(metrics)
    summary = summarize(rows)
    if summary["single_repeat"]:
        log.warning("single repeat: standard deviations reported as 0")
    return rows, summary


def hop_sweep(values, model_cfg, gs, protocol, train_cfg=None, learn_hop=False):
    """Repeat the protocol with the hop threshold initialised (and by default
    frozen) at each value.  One summary row per hop."""
    if not values:
        raise BadConfig("hop sweep needs at least one value")
    table = []
    for h in values:
        cfg = replace(model_cfg, hop_init=float(h), learn_hop=learn_hop)
        _, summary = run_repeats(cfg, gs, protocol, train_cfg)
        table.append({"hop": float(h), **summary})
    return table


def sparsifier_comparison(densities, model_cfg, cohort, protocol, train_cfg=None):
    """OMST against percentage thresholding at each density."""
    table = []
    for method, dens in [("omst", None)] + [("threshold", d) for d in densities]:
        if dens is not None and not 0 < dens <= 1:
            raise BadConfig(f"density {dens} outside (0, 1]")
        gs = prepare(cohort, method, dens if dens is not None else 0.15)
        _, summary = run_repeats(model_cfg, gs, protocol, train_cfg)
        table.append({"method": method, "density": dens if dens is not None else float("nan"),
                      "realized_density": float(gs.densities.mean()), **summary})
    return table
