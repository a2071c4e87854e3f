import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antsyn.classifier import (
    BoostedForest,
    BoostParams,
    ClassifierError,
    fit,
    fit_logistic,
    load_forest,
    load_logistic,
    log_loss,
    predict,
    predict_matrix,
    provenance_of,
    save_forest,
    save_logistic,
)
from antsyn.features import FeatureMask, PairFeatures


def separable(rng, n=80):
    X = rng.uniform(-1, 1, size=(n, 4))
    y = (X[:, 0] > 0.5).astype(int)
    return X, y


def three_class(rng, n=150):
    X = rng.normal(size=(n, 4))
    y = np.digitize(X[:, 0] + 0.5 * X[:, 1], [-0.5, 0.5])
    return X, y


class TestFit:
    def test_separable_within_five_trees(self, rng):
        X, y = separable(rng)
        forest = fit(X, y, BoostParams(n_trees=5))
        assert len(forest.trees) <= 5
        assert np.mean(forest.predict(X) == y) == 1.0

    def test_single_stump_closed_form(self):
        # p = 1/2 everywhere: g = p - onehot, h = 1/4, leaf = -G / (H + lambda)
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1])
        forest = fit(X, y, BoostParams(n_trees=1, max_depth=1, learning_rate=1.0, reg_lambda=1.0))
        (tree,) = forest.trees
        assert tree.feature[0] == 0 and tree.threshold[0] == 0.5
        left, right = tree.value[tree.left[0]], tree.value[tree.right[0]]
        np.testing.assert_allclose(left, [1 / 1.5, -1 / 1.5], atol=1e-12)
        np.testing.assert_allclose(right, [-1 / 1.5, 1 / 1.5], atol=1e-12)

    def test_deterministic(self, rng, tmp_path):
        X, y = three_class(rng)
        save_forest(fit(X, y, BoostParams(n_trees=20)), tmp_path / "a.txt")
        save_forest(fit(X, y, BoostParams(n_trees=20)), tmp_path / "b.txt")
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()

    def test_three_class_shape(self, rng):
        X, y = three_class(rng)
        forest = fit(X, y, BoostParams(n_trees=10, max_depth=3))
        assert forest.n_classes == 3
        for t in forest.trees:
            assert t.value.shape[1] == 3
            assert t.depth() <= 3
            assert np.all(t.feature[t.feature >= 0] < 4)
        assert forest.predict_proba(X).shape == (len(X), 3)

    def test_single_class(self):
        with pytest.raises(ClassifierError):
            fit(np.zeros((5, 4)), np.zeros(5, dtype=int))

    def test_non_finite(self, rng):
        X, y = separable(rng)
        X[0, 0] = np.nan
        with pytest.raises(ClassifierError):
            fit(X, y)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([0.05, 0.1, 0.3]), st.sampled_from([2, 3]))
    def test_log_loss_non_increasing(self, seed, lr, C):
        r = np.random.default_rng(seed)
        X = r.normal(size=(60, 4))
        y = r.integers(0, C, size=60)
        y[:C] = np.arange(C)
        forest = fit(X, y, BoostParams(n_trees=15, learning_rate=lr), n_classes=C)
        assert forest.train_loss[0] == pytest.approx(math.log(C))
        assert np.all(np.diff(forest.train_loss) <= 1e-12)


class TestPredict:
    def test_zero_tree_uniform(self):
        forest = BoostedForest(3, 4, 0.1, 4)
        np.testing.assert_allclose(forest.predict_proba(np.ones((2, 4))), np.full((2, 3), 1 / 3))

    def test_probabilities_sum_to_one(self, rng):
        X, y = three_class(rng)
        P = fit(X, y, BoostParams(n_trees=10)).predict_proba(rng.normal(size=(50, 4)) * 5)
        np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-9)

    def test_identical_features_identical_predictions(self, rng):
        X, y = three_class(rng)
        forest = fit(X, y, BoostParams(n_trees=10))
        row = X[:1]
        a = forest.predict_proba(np.vstack([row, row, X[1:3]]))
        assert np.array_equal(a[0], a[1])

    def test_mask_mismatch(self, rng):
        X, y = separable(rng)
        mask = FeatureMask(True, True, False)
        forest = fit(X, y, BoostParams(n_trees=2), mask=mask)
        with pytest.raises(ClassifierError):
            predict(forest, PairFeatures(0.1, 0.2, 0.3, 0), FeatureMask())
        label, proba = predict(forest, PairFeatures(0.9, 0.2, 0.3, 0), mask)
        assert label in (0, 1) and proba.sum() == pytest.approx(1.0)

    def test_feature_count_checked(self, rng):
        X, y = separable(rng)
        with pytest.raises(ClassifierError):
            fit(X, y, BoostParams(n_trees=2)).predict(np.zeros((1, 3)))

    def test_log_loss_reference(self):
        y = np.array([0, 1])
        margins = np.array([[2.0, 0.0], [0.0, 1.0]])
        ref = -(math.log(math.exp(2) / (math.exp(2) + 1)) + math.log(math.e / (1 + math.e))) / 2
        assert log_loss(y, margins) == pytest.approx(ref, abs=1e-12)


class TestLogistic:
    def test_fits_separable(self, rng):
        X, y = separable(rng)
        model = fit_logistic(X, y, mask=FeatureMask())
        assert np.mean(model.predict(X) == y) >= 0.95
        labels, proba = predict_matrix(model, X, FeatureMask())
        np.testing.assert_array_equal(labels, model.predict(X))

    def test_round_trip(self, rng, tmp_path):
        X, y = three_class(rng)
        model = fit_logistic(X, y)
        save_logistic(model, tmp_path / "lr.json")
        back = load_logistic(tmp_path / "lr.json")
        np.testing.assert_array_equal(back.predict_proba(X), model.predict_proba(X))


class TestForestFile:
    def test_round_trip(self, rng, tmp_path):
        X, y = three_class(rng)
        forest = fit(X, y, BoostParams(n_trees=25), mask=FeatureMask(True, False, True))
        save_forest(forest, tmp_path / "f.txt", provenance={"seed": 3})
        back = load_forest(tmp_path / "f.txt")
        assert back.mask == forest.mask and back.n_classes == 3 and len(back.trees) == len(forest.trees)
        Q = rng.normal(size=(200, 4))
        np.testing.assert_array_equal(back.decision_function(Q), forest.decision_function(Q))
        assert provenance_of(tmp_path / "f.txt") == {"seed": 3}
        assert back.train_loss == forest.train_loss

    def test_header(self, rng, tmp_path):
        X, y = separable(rng)
        save_forest(fit(X, y, BoostParams(n_trees=1)), tmp_path / "f.txt")
        assert (tmp_path / "f.txt").read_text().splitlines()[0] == "antsyn-forest 1"

    @pytest.mark.parametrize("damage", ["version", "truncate"])
    def test_corrupt(self, rng, tmp_path, damage):
        X, y = separable(rng)
        save_forest(fit(X, y, BoostParams(n_trees=3)), tmp_path / "f.txt")
        text = (tmp_path / "f.txt").read_text()
        if damage == "version":
            text = text.replace("antsyn-forest 1", "antsyn-forest 7", 1)
        else:
            text = "\n".join(text.splitlines()[: len(text.splitlines()) // 2])
        (tmp_path / "f.txt").write_text(text)
        with pytest.raises(ClassifierError):
            load_forest(tmp_path / "f.txt")
