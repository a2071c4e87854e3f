import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import antsyn.distiller as dist
from antsyn.distiller import (
    Batch,
    DistillerError,
    DistillerModel,
    EncoderParams,
    LossTerms,
    ModelConfig,
    ModelFormatError,
    SoftmaxHead,
    TrainConfig,
    TrainingDivergedError,
    ant_logit,
    encode,
    gradient_check,
    load_model,
    loss_and_grads,
    loss_ant,
    loss_classifier,
    loss_syn,
    read_trace,
    save_model,
    scores,
    syn_logit,
    train,
    write_trace,
)
from antsyn.embeddings import make_random_table
from antsyn.synthetic import planted_task


def small_model(seed=0, d=6, h1=8, m=6, n_classes=2):
    return DistillerModel.init(ModelConfig(d=d, h1=h1, m=m, n_classes=n_classes, seed=seed))


def random_model(rng, d=5, h1=7, m=4, scale=1.0):
    """Parameters drawn far from the initialiser, to exercise generic settings."""
    def enc():
        return EncoderParams(
            rng.normal(scale=scale, size=(h1, d)), rng.normal(scale=scale, size=h1),
            rng.normal(scale=scale, size=(m, h1)), rng.normal(scale=scale, size=m),
        )
    return DistillerModel(enc(), enc(), SoftmaxHead(rng.normal(size=(2, 2)), rng.normal(size=2)), ModelConfig(d, h1, m))


def word_batch(table, rng, n_pairs=4, k=2, n_classes=2):
    words = table.words

    def pairs(n):
        out = []
        while len(out) < n:
            i, j = rng.choice(len(words), 2, replace=False)
            out.append((words[i], words[j]))
        return out

    sp, ap = pairs(n_pairs), pairs(n_pairs)
    labeled = sp + ap
    labels = [0] * n_pairs + [1] * n_pairs
    if n_classes == 3:
        extra = pairs(n_pairs)
        labeled, labels = labeled + extra, labels + [2] * n_pairs
    return Batch.from_words(table, sp, pairs(n_pairs * k), ap, pairs(n_pairs * k), labeled, labels)


class TestEncode:
    def test_zero_params(self):
        z = encode(EncoderParams.zeros(3, 4, 5), np.array([1.0, -2.0, 7.0]))
        np.testing.assert_array_equal(z, np.full(5, 0.5))

    def test_hand_computed(self):
        p = EncoderParams(
            W1=np.array([[0.5, -1.0], [2.0, 0.25]]), b1=np.array([0.1, -0.2]),
            W2=np.array([[1.5, -0.7]]), b2=np.array([0.3]),
        )
        # h = (s(0.6), s(1.8)); z = s(1.5 h1 - 0.7 h2 + 0.3), evaluated by hand
        assert encode(p, np.array([1.0, 0.0]))[0] == pytest.approx(0.6610059318607362, abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DistillerError):
            encode(EncoderParams.zeros(3, 4, 5), np.ones(4))

    def test_batch_matches_rows(self, rng):
        m = small_model()
        X = rng.normal(size=(5, 6))
        Z = encode(m.enc_S, X)
        for i in range(5):
            np.testing.assert_allclose(Z[i], encode(m.enc_S, X[i]), rtol=0, atol=1e-15)

    def test_large_inputs_stay_finite(self):
        z = encode(EncoderParams.glorot(3, 4, 5, np.random.default_rng(0)), np.array([1e6, -1e6, 1e6]))
        assert np.all(np.isfinite(z)) and np.all((z >= 0) & (z <= 1))


class TestLogits:
    def test_syn_logit_reference(self, rng):
        m = small_model()
        a, b = rng.normal(size=6), rng.normal(size=6)
        u, v = encode(m.enc_S, a), encode(m.enc_S, b)
        ref = math.tanh(sum(float(x) * float(y) for x, y in zip(u, v)))
        assert syn_logit(m, a, b) == pytest.approx(ref, abs=1e-14)

    def test_zero_projection(self):
        m = small_model()
        # a huge negative output bias drives enc_S to ~0
        m.enc_S.b2[:] = -800.0
        m.enc_A.b2[:] = -800.0
        assert syn_logit(m, np.ones(6), np.ones(6)) == 0.0
        assert ant_logit(m, np.ones(6), np.ones(6)) == 0.0

    def test_ant_logit_asymmetric(self, rng):
        m = random_model(rng)
        a, b = rng.normal(size=5), rng.normal(size=5)
        assert ant_logit(m, a, b) != ant_logit(m, b, a)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetry_and_range(self, seed):
        r = np.random.default_rng(seed)
        m = random_model(r, scale=2.0)
        a, b = r.normal(size=5) * 3, r.normal(size=5) * 3
        assert syn_logit(m, a, b) == syn_logit(m, b, a)
        s_ab, t_ab = scores(m, a, b)
        s_ba, t_ba = scores(m, b, a)
        assert s_ab == s_ba and t_ab == t_ba
        assert -1 < syn_logit(m, a, b) < 1 and -1 < ant_logit(m, a, b) < 1
        assert s_ab > 0
        Z = encode(m.enc_S, a)
        assert np.all((Z > 0) & (Z < 1))

    def test_self_score(self, rng):
        m = small_model()
        a = rng.normal(size=6)
        assert scores(m, a, a)[0] == pytest.approx(1.0, abs=1e-9)


class TestHinge:
    def test_zero_logit_positive(self):
        m = small_model()
        m.enc_S.b2[:] = -800.0
        assert loss_syn(m, [(np.ones(6), np.ones(6))], []) == pytest.approx(1.0, abs=1e-12)

    def test_near_saturated_negative(self):
        # sigmoid outputs keep f > 0, so f = -1 + eps needs hand-built projections
        eps = 1e-3
        s = math.atanh(-1 + eps)
        Z = np.array([[s], [1.0]])
        loss, _, _ = dist._hinge_block(Z, Z, np.array([[0, 1]]), -1.0, 1.0)
        assert loss == pytest.approx(eps, abs=1e-12)

    def test_ant_contributions(self):
        eps = 1e-3
        Z = np.array([[0.0], [1.0]])
        assert dist._hinge_block(Z, Z, np.array([[0, 1]]), 1.0, 1.0)[0] == 1.0
        Z = np.array([[math.atanh(1 - eps)], [1.0]])
        assert dist._hinge_block(Z, Z, np.array([[0, 1]]), -1.0, 1.0)[0] == pytest.approx(2 - eps, abs=1e-12)

    def test_mixed_batch_term_by_term(self, rng):
        m = random_model(rng, d=6)
        pos = [(rng.normal(size=6), rng.normal(size=6)) for _ in range(3)]
        neg = [(rng.normal(size=6), rng.normal(size=6)) for _ in range(4)]

        def f(a, b, enc_l):
            return math.tanh(float(np.dot(encode(enc_l, a), encode(m.enc_S, b))))

        ref_s = sum(max(0.0, 1 - f(a, b, m.enc_S)) for a, b in pos) + sum(max(0.0, 1 + f(a, b, m.enc_S)) for a, b in neg)
        ref_a = sum(max(0.0, 1 - f(a, b, m.enc_A)) for a, b in pos) + sum(max(0.0, 1 + f(a, b, m.enc_A)) for a, b in neg)
        assert loss_syn(m, pos, neg) == pytest.approx(ref_s, rel=1e-12)
        assert loss_ant(m, pos, neg) == pytest.approx(ref_a, rel=1e-12)

    def test_empty(self):
        m = small_model()
        assert loss_syn(m, [], []) == 0.0 and loss_ant(m, [], []) == 0.0

    def test_inactive_hinges_zero_grad(self, rng):
        m = small_model()
        table = make_random_table([f"w{i}" for i in range(8)], 6, seed=1)
        b = Batch.from_words(table, syn_pos=[("w0", "w1"), ("w2", "w3")], ant_pos=[("w4", "w5")])
        # initial projections have <z, z> near 1, so f ~ 0.76 clears a 0.1 margin
        terms, grads = loss_and_grads(m, b, margin=0.1)
        assert terms.L_S == 0.0 and terms.L_A == 0.0
        for name, g in grads.items():
            assert np.all(g == 0.0), name


class TestClassifierLoss:
    def test_uniform_head(self, rng):
        m = small_model()
        m.head = SoftmaxHead(np.zeros((2, 2)), np.zeros(2))
        pairs = [(rng.normal(size=6), rng.normal(size=6)) for _ in range(5)]
        assert loss_classifier(m, pairs, [0, 1, 0, 1, 1]) == pytest.approx(math.log(2), abs=1e-12)

    def test_closed_form(self, rng):
        m = small_model()
        m.head = SoftmaxHead(np.zeros((2, 2)), np.array([math.log(0.9), math.log(0.1)]))
        assert loss_classifier(m, [(rng.normal(size=6), rng.normal(size=6))], [0]) == pytest.approx(-math.log(0.9), abs=1e-12)

    def test_empty_batch(self):
        with pytest.raises(DistillerError):
            loss_classifier(small_model(), [], [])

    def test_head_gradient_closed_form(self, rng):
        m = small_model(n_classes=3)
        m.head = SoftmaxHead(rng.normal(size=(3, 2)), rng.normal(size=3))
        table = make_random_table([f"w{i}" for i in range(10)], 6, seed=2)
        b = word_batch(table, rng, n_classes=3)
        _, grads = loss_and_grads(m, b)
        # reference: d/dW mean CE = (p - onehot)^T x / n
        Xa, Xb = b.X[b.labeled[:, 0]], b.X[b.labeled[:, 1]]
        x = np.array([scores(m, u, v) for u, v in zip(Xa, Xb)])
        logits = x @ m.head.W.T + m.head.b
        p = np.exp(logits - logits.max(1, keepdims=True))
        p /= p.sum(1, keepdims=True)
        R = p - np.eye(3)[b.labels]
        np.testing.assert_allclose(grads["head.W"], R.T @ x / len(x), atol=1e-12)
        np.testing.assert_allclose(grads["head.b"], R.mean(0), atol=1e-12)
        report = gradient_check(m, b, params=["head.W", "head.b"])
        assert report.passed, report.per_param

    def test_total_positive(self, rng):
        table = make_random_table([f"w{i}" for i in range(10)], 6, seed=2)
        terms = dist.total_loss(small_model(), word_batch(table, rng))
        assert terms.L_S >= 0 and terms.L_A >= 0 and terms.L_M > 0 and terms.total > 0


class TestGradientCheck:
    @pytest.mark.parametrize("n_classes", [2, 3])
    def test_full_model(self, rng, n_classes):
        m = small_model(seed=3, n_classes=n_classes)
        table = make_random_table([f"w{i}" for i in range(10)], 6, seed=4)
        table.vectors[:] = rng.normal(size=table.vectors.shape)
        report = gradient_check(m, word_batch(table, rng, n_classes=n_classes), epsilon=1e-5, tolerance=1e-4)
        assert report.passed, report.per_param
        assert set(report.per_param) == set(dist.PARAM_NAMES)

    def test_kink_free_batch_unreachable(self):
        m = small_model()
        table = make_random_table(["a", "b", "c"], 6, seed=0)
        # a pair scored against itself ties c1 == c2 exactly, whatever the jitter
        b = Batch.from_words(table, labeled=[("a", "a")], labels=[0])
        with pytest.raises(dist.GradientCheckError):
            gradient_check(m, b, max_attempts=5)


class TestAdam:
    def test_minimises_quadratic(self):
        x = np.array([3.0, -2.0])
        params = {"x": x}
        opt = dist.Adam(params, lr=0.1)
        for _ in range(500):
            opt.step(params, {"x": 2 * x})
        assert np.all(np.abs(x) < 1e-2)

    def test_first_step_size(self):
        # bias correction makes the first step exactly lr * sign(g)
        x = np.array([1.0, -1.0])
        opt = dist.Adam({"x": x}, lr=0.01)
        opt.step({"x": x}, {"x": np.array([5.0, -0.2])})
        np.testing.assert_allclose(x, [0.99, -0.99], atol=1e-8)


def tiny_task():
    return planted_task(n_clusters=4, cluster_size=4, dim=8, seed=1)


class TestTrain:
    def test_epochs_zero(self):
        t = tiny_task()
        mc = ModelConfig(d=8, h1=8, m=6, seed=5)
        model, trace = train(t.table, t.split, TrainConfig(epochs=0), mc)
        ref = DistillerModel.init(mc)
        assert trace == []
        for k, v in ref.params().items():
            np.testing.assert_array_equal(model.params()[k], v)

    def test_bit_identical_traces(self):
        cfg = TrainConfig(epochs=4, batch_size=8, seed=3)
        mc = ModelConfig(d=8, h1=8, m=6, seed=3)
        t1, t2 = tiny_task(), tiny_task()
        m1, tr1 = train(t1.table, t1.split, cfg, mc)
        m2, tr2 = train(t2.table, t2.split, cfg, mc)
        assert tr1 == tr2
        for k in dist.PARAM_NAMES:
            assert m1.params()[k].tobytes() == m2.params()[k].tobytes()

    def test_non_finite_aborts(self, monkeypatch):
        t = tiny_task()

        def boom(model, batch, margin=1.0):
            return LossTerms(0.5, float("nan"), 0.1), {}

        monkeypatch.setattr(dist, "loss_and_grads", boom)
        with pytest.raises(TrainingDivergedError, match=r"L_A.*epoch 1, batch 0"):
            train(t.table, t.split, TrainConfig(epochs=2), ModelConfig(d=8, h1=8, m=6))

    def test_early_stopping(self):
        t = tiny_task()
        _, trace = train(t.table, t.split, TrainConfig(epochs=50, patience=0, batch_size=8), ModelConfig(d=8, h1=8, m=6))
        assert 1 <= len(trace) <= 50
        if len(trace) < 50:
            assert trace[-1].dev_F1 < max(r.dev_F1 for r in trace[:-1])

    def test_dim_mismatch(self):
        t = tiny_task()
        with pytest.raises(DistillerError):
            train(t.table, t.split, TrainConfig(epochs=1), ModelConfig(d=7))

    def test_trace_round_trip(self, tmp_path):
        t = tiny_task()
        _, trace = train(t.table, t.split, TrainConfig(epochs=3, batch_size=8), ModelConfig(d=8, h1=8, m=6))
        write_trace(trace, tmp_path / "trace.tsv")
        assert read_trace(tmp_path / "trace.tsv") == trace
        assert (tmp_path / "trace.tsv").read_text().splitlines()[0].split("\t") == list(dist.TRACE_COLUMNS)

    @pytest.mark.parametrize("bad", [dict(learning_rate=0), dict(batch_size=0), dict(epochs=-1)])
    def test_config_validation(self, bad):
        with pytest.raises(DistillerError):
            TrainConfig(**bad)


class TestPersistence:
    def test_round_trip(self, tmp_path, rng):
        m = small_model(seed=9, n_classes=3)
        m.train_config = {"seed": 9}
        save_model(m, tmp_path / "m.npz")
        back = load_model(tmp_path / "m.npz")
        assert back.config == m.config and back.train_config == m.train_config
        for k in dist.PARAM_NAMES:
            assert back.params()[k].tobytes() == m.params()[k].tobytes()
        a, b = rng.normal(size=6), rng.normal(size=6)
        assert scores(back, a, b) == scores(m, a, b)

    def test_byte_identical_resave(self, tmp_path):
        m = small_model()
        save_model(m, tmp_path / "a.npz")
        save_model(load_model(tmp_path / "a.npz"), tmp_path / "b.npz")
        assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()

    def test_truncated(self, tmp_path):
        save_model(small_model(), tmp_path / "m.npz")
        data = (tmp_path / "m.npz").read_bytes()
        (tmp_path / "t.npz").write_bytes(data[: len(data) // 2])
        with pytest.raises(ModelFormatError):
            load_model(tmp_path / "t.npz")

    def test_version_mismatch(self, tmp_path, monkeypatch):
        monkeypatch.setattr(dist, "MODEL_VERSION", 99)
        save_model(small_model(), tmp_path / "m.npz")
        monkeypatch.setattr(dist, "MODEL_VERSION", 1)
        with pytest.raises(ModelFormatError, match="version"):
            load_model(tmp_path / "m.npz")

    def test_shape_mismatch(self, tmp_path):
        m = small_model()
        m.enc_A.W2 = np.zeros((3, 8))
        save_model(m, tmp_path / "m.npz")
        with pytest.raises(ModelFormatError, match="shape"):
            load_model(tmp_path / "m.npz")
