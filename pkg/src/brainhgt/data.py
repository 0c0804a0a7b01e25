"""Synthetic cohorts with planted community structure and class effects,
plus per-subject graph preparation."""

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import graph as G
from .clustering import dice_prior, floor_empty_rows
from .errors import BadConfig, DisconnectedInput


@dataclass
class SyntheticCohortConfig:
    """Generator settings.

    Every ROI belongs to one of ``k_communities`` contiguous blocks and
    follows its community's latent signal plus private noise.  Subjects of
    class 1 couple community ``effect_pair[1]`` to ``effect_pair[0]`` with
    correlation strength ``class_effect``.

    With ``locality_radius`` set, the cohort follows the chain design of
    :func:`_local_signals`: the label is carried by the sign of the probe
    coupling of ROIs within ``locality_radius`` hops of a marker ROI.
    """
    n_subjects: int = 200
    n_rois: int = 30
    n_timepoints: int = 150
    k_communities: int = 4
    class_effect: float = 0.6
    noise_sigma: float = 1.0
    seed: int = 0
    effect_pair: tuple = (0, 1)
    community_strength: float = 1.0
    locality_radius: int = 0
    voxels_per_roi: int = 20
    extra_network_voxels: int = 10
    prior_leak: float = 0.1
    effect_pattern: str = "pair"

    def validate(self):
        if self.n_subjects < 2 or self.n_rois < 2 or self.n_timepoints < 2:
            raise BadConfig("need >= 2 subjects, ROIs and timepoints")
        if not 1 <= self.k_communities <= self.n_rois:
            raise BadConfig("k_communities must lie in [1, n_rois]")
        if not 0 <= self.class_effect < 1:
            raise BadConfig("class_effect must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise BadConfig("noise_sigma must be nonnegative")
        a, b = self.effect_pair
        if not (0 <= a < self.k_communities and 0 <= b < self.k_communities and a != b):
            raise BadConfig("effect_pair must name two distinct communities")
        if not 0 <= self.prior_leak < 1:
            raise BadConfig("prior_leak must lie in [0, 1)")
        if self.effect_pattern not in ("pair", "balanced"):
            raise BadConfig(f"unknown effect_pattern {self.effect_pattern!r}")
        if self.effect_pattern == "balanced" and (self.k_communities < 4 or self.class_effect >= 0.5):
            raise BadConfig("balanced effect needs >= 4 communities and class_effect < 0.5")
        if self.locality_radius < 0:
            raise BadConfig("locality_radius must be nonnegative")
        if self.locality_radius and self.n_rois < 2 * self.locality_radius + 7:
            raise BadConfig("locality cohort needs n_rois >= 2 * locality_radius + 7")
        if self.locality_radius and not 0 < self.class_effect < 1:
            raise BadConfig("locality cohort needs 0 < class_effect < 1")
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise BadConfig(f"unknown cohort options: {sorted(extra)}")
        data = dict(data)
        if "effect_pair" in data:
            data["effect_pair"] = tuple(data["effect_pair"])
        return cls(**data).validate()

    def to_dict(self):
        d = asdict(self)
        d["effect_pair"] = list(self.effect_pair)
        return d


@dataclass
class Cohort:
    timeseries: np.ndarray          # (S, N, T)
    labels: np.ndarray              # (S,)
    communities: np.ndarray         # (N,) planted community per ROI
    roi_voxels: list
    network_voxels: list
    config: SyntheticCohortConfig = None
    network_names: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    @property
    def prior(self):
        return floor_empty_rows(dice_prior(self.roi_voxels, self.network_voxels))


def planted_communities(n, k):
    return (np.arange(n) * k) // n


def _voxel_sets(cfg, communities, rng):
    """Disjoint home voxels per ROI; a ``prior_leak`` share of each ROI's
    voxels is relocated into a random foreign network's spare voxels."""
    n, k = cfg.n_rois, cfg.k_communities
    per = cfg.voxels_per_roi
    next_id = 0
    home = []
    for _ in range(n):
        home.append(list(range(next_id, next_id + per)))
        next_id += per
    spare = []
    for _ in range(k):
        spare.append(list(range(next_id, next_id + cfg.extra_network_voxels + per)))
        next_id += cfg.extra_network_voxels + per
    networks = [set(s[: cfg.extra_network_voxels]) for s in spare]
    rois = []
    n_leak = int(round(cfg.prior_leak * per))
    for i in range(n):
        c = communities[i]
        vox = set(home[i])
        networks[c] |= vox
        if n_leak and k > 1:
            foreign = int(rng.choice([j for j in range(k) if j != c]))
            moved = rng.choice(home[i], size=n_leak, replace=False)
            vox -= set(int(v) for v in moved)
            picks = rng.choice(spare[foreign], size=n_leak, replace=False)
            vox |= set(int(v) for v in picks)
            networks[foreign] |= set(int(v) for v in picks)
        rois.append(sorted(vox))
    return rois, [sorted(s) for s in networks]


def generate_synthetic_cohort(cfg):
    """Deterministic cohort of ``(time series, label)`` pairs with ground truth."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, k, t = cfg.n_rois, cfg.k_communities, cfg.n_timepoints
    communities = planted_communities(n, k)
    roi_voxels, network_voxels = _voxel_sets(cfg, communities, rng)
    labels = np.array([i % 2 for i in range(cfg.n_subjects)], dtype=np.int64)
    rng.shuffle(labels)
    c = cfg.class_effect
    ts = np.empty((cfg.n_subjects, n, t))
    for s in range(cfg.n_subjects):
        z = rng.normal(size=(k, t))
        eps = rng.normal(size=(n, t))
        if cfg.locality_radius:
            ts[s] = _local_signals(cfg, labels[s], rng)
            continue
        if c > 0:
            z = latent_mixing(cfg, labels[s]) @ z
        ts[s] = cfg.community_strength * z[communities] + cfg.noise_sigma * eps
    return Cohort(ts, labels, communities, roi_voxels, network_voxels, cfg,
                  [f"community_{i}" for i in range(k)])


def coupling_matrix(cfg, label):
    """Signed community coupling pattern (K x K, zero diagonal) for a class."""
    k = cfg.k_communities
    A = np.zeros((k, k))
    if cfg.effect_pattern == "pair":
        if label == 1:
            a, b = cfg.effect_pair
            A[a, b] = A[b, a] = 1.0
        return A
    sign = 1.0 if label == 1 else -1.0
    for (i, j), sg in (((0, 1), 1.0), ((2, 3), 1.0), ((0, 3), -1.0), ((1, 2), -1.0)):
        A[i, j] = A[j, i] = sign * sg
    return A


def latent_mixing(cfg, label):
    """Lower Cholesky factor of ``I + class_effect * coupling``."""
    cov = np.eye(cfg.k_communities) + cfg.class_effect * coupling_matrix(cfg, label)
    return np.linalg.cholesky(cov)


def _local_signals(cfg, label, rng, max_tries=400):
    """Locality cohort: a per-subject random chain through ROIs ``1 .. N-2``
    with the marker ROI 0 in the middle and the probe ROI ``N-1`` off-chain.

    Chain neighbours share private signals, so the sparse graph is long and
    thin.  ROIs within ``locality_radius`` hops of the marker are coupled to
    the probe with sign +1 and ROIs in the next ``locality_radius`` shells
    with sign -1 (signs flipped for class 0).  Draws whose coupling moves an
    ROI across a shell boundary on the final graph are rejected.  The chain is
    reshuffled per subject and both classes couple the same number of ROIs, so
    only the signed sum over a hop window around the marker reveals the class.
    """
    n, t = cfg.n_rois, cfg.n_timepoints
    r = cfg.locality_radius
    c = cfg.class_effect

    def shells(x):
        hops = G.omst_sparsify(G.pearson_correlation(x)).spl[0, : n - 1]
        return (hops >= 1) & (hops <= r), (hops > r) & (hops <= 2 * r)

    for _ in range(max_tries):
        chain = list(rng.permutation(np.arange(1, n - 1)))
        chain.insert(len(chain) // 2, 0)
        u = rng.normal(size=(n, t))
        x = np.empty((n, t))
        for p, i in enumerate(chain):
            nb = chain[max(p - 1, 0):p + 2]
            x[i] = u[nb].sum(axis=0) / np.sqrt(len(nb))
        x[n - 1] = u[n - 1]
        x = cfg.community_strength * x + cfg.noise_sigma * rng.normal(size=(n, t))
        inner, outer = shells(x)
        sign = inner.astype(float) - outer
        if label == 0:
            sign = -sign
        probe = x[n - 1] / x[n - 1].std()
        for i in np.flatnonzero(sign):
            x[i] = np.sqrt(1.0 - c * c) * x[i] + sign[i] * c * x[i].std() * probe
        new_inner, new_outer = shells(x)
        if np.array_equal(new_inner, inner) and np.array_equal(new_outer, outer):
            return x
    raise BadConfig("could not keep the coupled shells intact; "
                    "raise community_strength or lower class_effect")


def cross_block_statistic(cohort):
    """Mean correlation between the two coupled communities, per subject."""
    a, b = cohort.config.effect_pair
    ia = np.flatnonzero(cohort.communities == a)
    ib = np.flatnonzero(cohort.communities == b)
    out = np.empty(len(cohort))
    for s in range(len(cohort)):
        r = G.pearson_correlation(cohort.timeseries[s])
        out[s] = r[np.ix_(ia, ib)].mean()
    return out


@dataclass
class GraphSet:
    """Model-ready arrays for a cohort under one sparsification method."""
    corr: np.ndarray        # (S, N, N)
    spl: np.ndarray         # (S, N, N) hop counts, sentinel N when unreachable
    labels: np.ndarray
    prior: np.ndarray       # (N, K)
    densities: np.ndarray
    objectives: np.ndarray
    method: str = "omst"

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        idx = np.asarray(idx)
        return GraphSet(self.corr[idx], self.spl[idx], self.labels[idx], self.prior,
                        self.densities[idx], self.objectives[idx], self.method)


def build_graph(r, method="omst", density=0.15):
    if method == "omst":
        return G.omst_sparsify(r)
    if method == "threshold":
        return G.threshold_sparsify(r, density)
    raise BadConfig(f"unknown sparsification method {method!r}")


def prepare(cohort, method="omst", density=0.15, prior=None):
    """Correlation, sparse graph and hop matrix for every subject."""
    s, n, _ = cohort.timeseries.shape
    corr = np.empty((s, n, n))
    spl = np.empty((s, n, n))
    dens = np.empty(s)
    obj = np.empty(s)
    for i in range(s):
        r = G.pearson_correlation(cohort.timeseries[i])
        try:
            g = build_graph(r, method, density)
        except DisconnectedInput as exc:
            raise DisconnectedInput(f"subject {i}: {exc}") from exc
        corr[i] = r
        spl[i] = g.spl
        dens[i] = g.density
        obj[i] = g.objective
    return GraphSet(corr, spl, cohort.labels.copy(),
                    cohort.prior if prior is None else np.asarray(prior),
                    dens, obj, method)
