import numpy as np
import pytest

from brainhgt import tensor as T
from brainhgt.data import SyntheticCohortConfig, generate_synthetic_cohort, prepare
from brainhgt.errors import BadConfig
from brainhgt.model import BrainHGT, ModelConfig, init_params
from brainhgt.training import (SplitProtocol, TrainConfig, evaluate, hop_sweep, predict,
                               run_repeats, sparsifier_comparison, stratified_split, train)

TINY = ModelConfig(n_rois=10, d=8, heads=2, ffn_hidden=16, k_communities=2, cluster_heads=2,
                   mlp_hidden=4, dropout=0.1)


@pytest.fixture(scope="module")
def cohort():
    return generate_synthetic_cohort(SyntheticCohortConfig(
        n_subjects=40, n_rois=10, n_timepoints=60, k_communities=2, class_effect=0.7))


@pytest.fixture(scope="module")
def gs(cohort):
    return prepare(cohort)


class TestSplits:
    @pytest.mark.parametrize("seed", range(5))
    def test_disjoint_and_exhaustive(self, seed):
        labels = np.random.default_rng(seed).integers(0, 2, size=57)
        tr, va, te = stratified_split(labels, SplitProtocol(), seed)
        joined = np.concatenate([tr, va, te])
        assert sorted(joined.tolist()) == list(range(57))
        assert len(np.unique(joined)) == 57

    def test_fractions(self):
        labels = np.r_[np.zeros(100), np.ones(100)].astype(int)
        tr, va, te = stratified_split(labels, SplitProtocol(), 0)
        assert (len(tr), len(va), len(te)) == (140, 20, 40)
        assert labels[te].sum() == 20

    def test_protocol_validation(self):
        with pytest.raises(BadConfig):
            SplitProtocol(train_frac=0.8).validate()
        with pytest.raises(BadConfig):
            SplitProtocol(repeats=3, seeds=[0]).validate()


class TestTrain:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.epochs, c.batch_size, c.lr, c.weight_decay) == (100, 32, 1e-4, 1e-4)

    def test_zero_epochs_returns_init(self, gs):
        res = train(TINY, gs.subset(range(30)), gs.subset(range(30, 40)), TrainConfig(epochs=0))
        init = init_params(TINY, 0)
        assert all(np.array_equal(res.params[k], init[k]) for k in init)
        assert len(res.history) == 1 and res.best_epoch == 0

    def test_best_epoch_checkpoint(self, gs):
        tr, va = gs.subset(range(30)), gs.subset(range(30, 40))
        res = train(TINY, tr, va, TrainConfig(epochs=6, lr=1e-2))
        aucs = [h["val_auc"] for h in res.history]
        assert res.best_epoch == int(np.argmax(aucs)) + 1
        assert res.best_val_auc == max(aucs)
        # a replay stopped at the best epoch follows the same trajectory
        again = train(TINY, tr, va, TrainConfig(epochs=res.best_epoch, lr=1e-2))
        assert again.best_epoch == res.best_epoch
        assert all(again.params[k].tobytes() == res.params[k].tobytes() for k in res.params)

    def test_deterministic(self, gs):
        tr, va = gs.subset(range(30)), gs.subset(range(30, 40))
        a = train(TINY, tr, va, TrainConfig(epochs=2, lr=1e-2))
        b = train(TINY, tr, va, TrainConfig(epochs=2, lr=1e-2))
        assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)
        assert a.history == b.history

    def test_loss_decreases(self, gs):
        res = train(TINY, gs.subset(range(30)), gs.subset(range(30, 40)),
                    TrainConfig(epochs=15, lr=3e-3))
        assert res.history[-1]["loss"] < res.history[0]["loss"]

    def test_frozen_hop_stays(self, gs):
        from dataclasses import replace
        cfg = replace(TINY, hop_init=3.0, learn_hop=False)
        res = train(cfg, gs.subset(range(30)), gs.subset(range(30, 40)),
                    TrainConfig(epochs=2, lr=1e-2))
        assert np.array_equal(res.params["lsra0.hop"], [3.0])


class TestVariants:
    def test_no_clustering_has_no_cluster_params(self):
        from dataclasses import replace
        p = init_params(replace(TINY, variant="no_clustering"), 0)
        assert not [k for k in p if k.startswith(("cluster.", "refine."))]

    def test_no_lsra_has_no_mask_params(self):
        from dataclasses import replace
        p = init_params(replace(TINY, variant="no_lsra"), 0)
        assert not [k for k in p if k.endswith((".hop", ".gamma"))]

    def test_no_prior_equals_ones_prior(self, gs):
        from dataclasses import replace
        params = init_params(TINY, 3)
        full = BrainHGT(TINY, params=params)
        nop = BrainHGT(replace(TINY, variant="no_prior"), params=params)
        a = full.forward(gs.corr[:5], gs.spl[:5], np.ones_like(gs.prior)).data
        b = nop.forward(gs.corr[:5], gs.spl[:5], gs.prior).data
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)

    def test_no_entmax_assignment_dense(self, gs):
        from dataclasses import replace
        m = BrainHGT(replace(TINY, variant="no_entmax"), seed=1)
        cap = {}
        m.forward(gs.corr[:3], gs.spl[:3], gs.prior, capture=cap)
        assert cap["assignment"].min() > 0

    def test_model_permutation_equivariant(self, gs):
        # permuting ROIs everywhere (inputs, embedding rows, prior) leaves logits unchanged
        params = init_params(TINY, 5)
        perm = np.random.default_rng(0).permutation(10)
        q = dict(params)
        q["embed.w"] = params["embed.w"][perm]
        a = BrainHGT(TINY, params=params).forward(gs.corr[:4], gs.spl[:4], gs.prior).data
        corr = gs.corr[:4][:, perm][:, :, perm]
        spl = gs.spl[:4][:, perm][:, :, perm]
        b = BrainHGT(TINY, params=q).forward(corr, spl, gs.prior[perm]).data
        np.testing.assert_allclose(a, b, atol=1e-9)


class TestProtocols:
    def test_repeats_identical_seeds_zero_std(self, gs):
        proto = SplitProtocol(repeats=2, seeds=[1, 1])
        rows, summary = run_repeats(TINY, gs, proto, TrainConfig(epochs=1))
        assert rows[0] == rows[1]
        assert all(summary[f"{k}_std"] == 0.0 for k in ("acc", "auc", "sen", "spe"))

    def test_single_repeat_flag(self, gs):
        _, summary = run_repeats(TINY, gs, SplitProtocol(repeats=1, seeds=[0]),
                                 TrainConfig(epochs=1))
        assert summary["single_repeat"] and summary["auc_std"] == 0.0

    def test_hop_sweep_shape(self, gs):
        table = hop_sweep([1, 2, 3, 4], TINY, gs, SplitProtocol(repeats=1, seeds=[0]),
                          TrainConfig(epochs=1))
        assert [row["hop"] for row in table] == [1.0, 2.0, 3.0, 4.0]
        assert all("auc_mean" in row and "auc_std" in row for row in table)

    def test_hop_sweep_empty(self, gs):
        with pytest.raises(BadConfig):
            hop_sweep([], TINY, gs, SplitProtocol())

    def test_sparsifier_comparison_rows(self, cohort):
        table = sparsifier_comparison([0.1, 0.2], TINY, cohort,
                                      SplitProtocol(repeats=1, seeds=[0]), TrainConfig(epochs=1))
        assert [r["method"] for r in table] == ["omst", "threshold", "threshold"]
        assert 0 < table[0]["realized_density"] < 1

    def test_evaluate_consistency(self, gs):
        res = train(TINY, gs.subset(range(30)), gs.subset(range(30, 40)), TrainConfig(epochs=1))
        m = evaluate(res, gs.subset(range(30, 40)))
        n_pos = m["tp"] + m["fn"]
        n_neg = m["tn"] + m["fp"]
        assert m["acc"] == pytest.approx((m["sen"] * n_pos + m["spe"] * n_neg) / (n_pos + n_neg),
                                         abs=1e-15)
