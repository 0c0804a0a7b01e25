"""The full hierarchical model: input embedding, LSRA encoder layers,
prior-guided clustering with refinement, and the MLP readout."""

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import tensor as T
from .clustering import community_refine, prior_cross_attention, readout_classify
from .errors import BadConfig
from .lsra import lsra_forward
from .nn import gram_schmidt, xavier_uniform_init

VARIANTS = ("full", "no_lsra", "no_prior", "no_entmax", "no_clustering")


@dataclass
class ModelConfig:
    n_rois: int = 90
    d: int = 256
    heads: int = 8
    layers: int = 1
    ffn_hidden: int = 1024
    dropout: float = 0.1
    k_communities: int = 8
    cluster_heads: int = 8
    mlp_hidden: int = 32
    n_classes: int = 2
    hop_init: float = 2.0
    gamma_init: float = 0.0
    learn_hop: bool = True
    learn_gamma: bool = True
    mask_mode: str = "multiply"
    variant: str = "full"

    def validate(self):
        if self.heads % 2 or self.d % self.heads:
            raise BadConfig("heads must be even and divide d")
        if self.d % self.cluster_heads:
            raise BadConfig("cluster_heads must divide d")
        if self.variant not in VARIANTS:
            raise BadConfig(f"unknown variant {self.variant!r}")
        if self.mask_mode not in ("multiply", "additive_log"):
            raise BadConfig(f"unknown mask mode {self.mask_mode!r}")
        if self.k_communities > self.d:
            raise BadConfig("k_communities cannot exceed d")
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise BadConfig(f"unknown model options: {sorted(extra)}")
        return cls(**data).validate()

    def to_dict(self):
        return asdict(self)


def _block_params(rng, prefix, d, hidden, out):
    for name in ("wq", "wk", "wv", "wo"):
        out[f"{prefix}.{name}"] = xavier_uniform_init((d, d), rng)
    out[f"{prefix}.ln1_w"] = np.ones(d)
    out[f"{prefix}.ln1_b"] = np.zeros(d)
    out[f"{prefix}.w1"] = xavier_uniform_init((d, hidden), rng)
    out[f"{prefix}.b1"] = np.zeros(hidden)
    out[f"{prefix}.w2"] = xavier_uniform_init((hidden, d), rng)
    out[f"{prefix}.b2"] = np.zeros(d)
    out[f"{prefix}.ln2_w"] = np.ones(d)
    out[f"{prefix}.ln2_b"] = np.zeros(d)


def init_params(cfg, seed):
    """Fresh parameter arrays keyed by dotted names, deterministic in ``seed``."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    d = cfg.d
    p = {
        "embed.w": xavier_uniform_init((cfg.n_rois, d), rng),
        "embed.b": np.zeros(d),
    }
    for layer in range(cfg.layers):
        pre = f"lsra{layer}"
        _block_params(rng, pre, d, cfg.ffn_hidden, p)
        if cfg.variant != "no_lsra":
            p[f"{pre}.hop"] = np.full(cfg.heads // 2, float(cfg.hop_init))
            p[f"{pre}.gamma"] = np.full(cfg.heads // 2, float(cfg.gamma_init))
    if cfg.variant != "no_clustering":
        protos = xavier_uniform_init((cfg.k_communities, d), rng)
        p["cluster.protos"] = gram_schmidt(protos)
        for name in ("wq", "wk", "wv"):
            p[f"cluster.{name}"] = xavier_uniform_init((d, d), rng)
        _block_params(rng, "refine", d, cfg.ffn_hidden, p)
    p["head.w1"] = xavier_uniform_init((d, cfg.mlp_hidden), rng)
    p["head.b1"] = np.zeros(cfg.mlp_hidden)
    p["head.w2"] = xavier_uniform_init((cfg.mlp_hidden, cfg.n_classes), rng)
    p["head.b2"] = np.zeros(cfg.n_classes)
    return p


def _group(params, prefix):
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in params.items() if k.startswith(prefix + ".")}


class BrainHGT:
    """Parameters plus forward pass.

    ``params`` maps names to :class:`Tensor` leaves.  ``frozen`` names stay
    fixed during training (used by the hop sweep).
    """

    def __init__(self, cfg, params=None, seed=0):
        self.cfg = cfg.validate()
        arrays = params if params is not None else init_params(cfg, seed)
        self.frozen = set()
        if not cfg.learn_hop:
            self.frozen |= {k for k in arrays if k.endswith(".hop")}
        if not cfg.learn_gamma:
            self.frozen |= {k for k in arrays if k.endswith(".gamma")}
        self.params = {
            k: T.Tensor(np.array(v, dtype=np.float64, copy=True),
                        requires_grad=k not in self.frozen, name=k)
            for k, v in arrays.items()
        }

    def state_dict(self):
        return {k: t.data.copy() for k, t in self.params.items()}

    def load_state_dict(self, arrays):
        missing = set(self.params) ^ set(arrays)
        if missing:
            raise BadConfig(f"checkpoint/model parameter mismatch: {sorted(missing)}")
        for k, v in arrays.items():
            self.params[k].data = np.array(v, dtype=np.float64, copy=True)

    def trainable(self):
        return {k: t for k, t in self.params.items() if t.requires_grad}

    def n_parameters(self):
        return int(sum(t.size for t in self.params.values()))

    def encode(self, corr, spl, training=False, rng=None, capture=None):
        """Node features after the LSRA encoder, shape (B, N, d)."""
        cfg = self.cfg
        p = self.params
        x = T.add(T.matmul(T.as_tensor(corr), p["embed.w"]), p["embed.b"])
        for layer in range(cfg.layers):
            cap = capture if (capture is not None and layer == cfg.layers - 1) else None
            x = lsra_forward(x, spl, _group(p, f"lsra{layer}"), cfg.heads,
                             local=cfg.variant != "no_lsra", mode=cfg.mask_mode,
                             dropout=cfg.dropout, rng=rng, training=training, capture=cap)
        return x

    def forward(self, corr, spl, prior, training=False, rng=None, capture=None):
        """Class logits (B, n_classes) for correlation matrices (B, N, N),
        hop-distance matrices (B, N, N) and the Dice prior (N, K) or (B, N, K)."""
        cfg = self.cfg
        p = self.params
        corr = np.asarray(corr, dtype=np.float64)
        if corr.ndim == 2:
            corr, spl = corr[None], np.asarray(spl)[None]
        x = self.encode(corr, spl, training, rng, capture)
        if cfg.variant == "no_clustering":
            return readout_classify(x, _group(p, "head"))
        if cfg.variant == "no_prior":
            prior = np.ones(np.shape(prior))
        P, xc = prior_cross_attention(p["cluster.protos"], x, prior, _group(p, "cluster"),
                                      heads=cfg.cluster_heads,
                                      sparse=cfg.variant != "no_entmax")
        if capture is not None:
            capture["assignment"] = P.data
        xr = community_refine(xc, _group(p, "refine"), cfg.heads, cfg.dropout, rng,
                              training, capture)
        return readout_classify(xr, _group(p, "head"))

    def predict_proba(self, corr, spl, prior):
        with T.no_grad():
            logits = self.forward(corr, spl, prior).data
        return T.softmax_np(logits, axis=-1)
