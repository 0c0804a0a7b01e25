import numpy as np
import pytest

from brainhgt.errors import BadShape, RankDeficient, ShapeMismatch
from brainhgt.nn import AdamState, adam_step, gram_schmidt, xavier_uniform_init


class TestXavier:
    def test_bound(self):
        w = xavier_uniform_init((256, 256), 0)
        assert np.abs(w).max() <= np.sqrt(6 / 512)

    def test_deterministic(self):
        a = xavier_uniform_init((13, 7), 42)
        b = xavier_uniform_init((13, 7), 42)
        assert a.tobytes() == b.tobytes()

    def test_mean_near_zero(self):
        w = xavier_uniform_init((1000, 1000), 2024)
        bound = np.sqrt(6 / 2000)
        sigma = bound / np.sqrt(3) / np.sqrt(w.size)
        assert abs(w.mean()) < 3 * sigma

    def test_rejects_vector(self):
        with pytest.raises(BadShape):
            xavier_uniform_init((5,), 0)


class TestGramSchmidt:
    def test_orthonormal_unchanged(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(6, 4)))
        c = q.T
        np.testing.assert_allclose(gram_schmidt(c), c, atol=1e-12)

    def test_hand_case(self):
        np.testing.assert_allclose(gram_schmidt([[1, 0], [1, 1]]), [[1, 0], [0, 1]], atol=1e-15)

    def test_random_gram_identity(self):
        c = gram_schmidt(np.random.default_rng(1).normal(size=(8, 256)))
        np.testing.assert_allclose(c @ c.T, np.eye(8), atol=1e-8)

    def test_span_preserved(self):
        rng = np.random.default_rng(2)
        c0 = rng.normal(size=(4, 10))
        c = gram_schmidt(c0)
        for k in range(1, 5):
            proj = c0[:k] @ c[:k].T @ c[:k]
            np.testing.assert_allclose(proj, c0[:k], atol=1e-10)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient) as info:
            gram_schmidt([[1, 2, 3], [2, 4, 6]])
        assert info.value.row == 1


def _scalar_adam(theta, grads, lr, b1, b2, eps, wd):
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        g = g + wd * theta
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return theta


class TestAdam:
    def test_zero_grad_no_decay(self):
        p = {"w": np.array([1.0, -2.0])}
        adam_step(p, {"w": np.zeros(2)}, AdamState(weight_decay=0.0))
        assert np.array_equal(p["w"], [1.0, -2.0])

    def test_first_step_sign(self):
        g = np.array([0.3, -5.0, 1e-3])
        p = {"w": np.zeros(3)}
        st = AdamState(weight_decay=0.0)
        adam_step(p, {"w": g}, st)
        # mhat = g, vhat = g^2 on step one
        np.testing.assert_allclose(p["w"], -1e-4 * g / (np.abs(g) + 1e-8), rtol=1e-14)
        assert np.all(np.sign(p["w"]) == -np.sign(g))
        assert st.step == 1

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        grads = rng.normal(size=(20, 3))
        p = {"w": np.array([0.5, -0.1, 2.0])}
        st = AdamState(lr=1e-2, weight_decay=1e-2)
        for g in grads:
            adam_step(p, {"w": g}, st)
        for i in range(3):
            exp = _scalar_adam([0.5, -0.1, 2.0][i], grads[:, i], 1e-2, 0.9, 0.999, 1e-8, 1e-2)
            assert p["w"][i] == pytest.approx(exp, rel=1e-12)

    def test_defaults(self):
        st = AdamState()
        assert (st.lr, st.weight_decay, st.beta1, st.beta2, st.eps) == (1e-4, 1e-4, 0.9, 0.999, 1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())
