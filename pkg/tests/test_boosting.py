import numpy as np
import pytest

from fallkit.boosting import (
    BoostModel,
    DecisionStump,
    adaboost_train,
    boost_predict,
    load_boost_model,
    save_boost_model,
    train_stump,
)


# --- exhaustive reference implementations ------------------------------------

def brute_force_stump(values, labels, weights):
    """Try every midpoint threshold and both polarities; same tie rule:
    lower error, then smaller threshold, then polarity +1."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    labels = np.asarray(labels)
    best = None
    distinct = np.unique(values)
    for lo, hi in zip(distinct, distinct[1:]):
        theta = (lo + hi) / 2
        for pol in (1, -1):
            pred = np.where(values >= theta, pol, -pol)
            err = float(weights[pred != labels].sum())
            cand = (err, theta, -pol)  # -pol: +1 sorts first on ties
            if best is None or cand < best:
                best = cand
    if best is None:
        return None
    err, theta, neg_pol = best
    return theta, -neg_pol, err


def reference_adaboost(X, y, w, rounds):
    """Independent mini-boost: exhaustive stump per round."""
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    stumps = []
    for _ in range(rounds):
        best = None
        for f in range(X.shape[1]):
            got = brute_force_stump(X[:, f], y, w)
            if got is None:
                continue
            theta, pol, err = got
            if best is None or err < best[0] - 1e-15:
                best = (err, f, theta, pol)
        err, f, theta, pol = best
        if err >= 0.5 - 1e-9:
            break
        if err <= 0:
            stumps.append((f, theta, pol, np.log(1e9)))
            break
        alpha = 0.5 * np.log((1 - err) / err)
        stumps.append((f, theta, pol, alpha))
        h = np.where(X[:, f] >= theta, pol, -pol)
        w = w * np.exp(-alpha * y * h)
        w = w / w.sum()
    return stumps


def ensemble_error(model, X, y):
    pred, _ = boost_predict(model, X)
    return float((pred != y).mean())


class TestTrainStump:
    def test_separable_column(self):
        stump, err = train_stump([1, 2, 8, 9], [-1, -1, 1, 1], np.ones(4) / 4)
        assert (stump.threshold, stump.polarity, err) == (5.0, 1, 0.0)

    def test_anti_ordered_column(self):
        stump, err = train_stump([1, 2, 8, 9], [1, 1, -1, -1], np.ones(4) / 4)
        assert (stump.threshold, stump.polarity, err) == (5.0, -1, 0.0)

    def test_heavy_sample_classified_correctly(self):
        # one sample carries 0.97 of the mass; brute force confirms
        values = np.array([3.0, 1.0, 2.0, 2.5])
        labels = np.array([-1, 1, 1, 1])
        weights = np.array([0.97, 0.01, 0.01, 0.01])
        stump, err = train_stump(values, labels, weights)
        pred = stump.predict(values)
        assert pred[0] == -1
        want = brute_force_stump(values, labels, weights)
        assert (stump.threshold, stump.polarity) == want[:2]
        assert np.isclose(err, want[2])

    def test_matches_exhaustive_search_on_random_columns(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            values = rng.normal(size=50)
            labels = np.where(rng.random(50) < 0.5, 1, -1)
            if len(set(labels)) < 2:
                labels[0] = -labels[0]
            weights = rng.uniform(0.01, 1.0, size=50)
            stump, err = train_stump(values, labels, weights)
            want_theta, want_pol, want_err = brute_force_stump(values, labels, weights)
            assert np.isclose(err, want_err), trial
            assert np.isclose(stump.threshold, want_theta), trial
            assert stump.polarity == want_pol, trial

    def test_quantized_values_with_ties(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            values = rng.integers(0, 4, size=30).astype(float)
            labels = np.where(rng.random(30) < 0.5, 1, -1)
            if len(set(labels)) < 2:
                labels[0] = -labels[0]
            weights = rng.uniform(0.1, 1.0, size=30)
            stump, err = train_stump(values, labels, weights)
            want_theta, want_pol, want_err = brute_force_stump(values, labels, weights)
            assert np.isclose(err, want_err), trial
            assert np.isclose(stump.threshold, want_theta), trial
            assert stump.polarity == want_pol, trial

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_stump([1, 2, 3], [1, 1, 1], np.ones(3) / 3)

    def test_constant_column_rejected(self):
        with pytest.raises(ValueError):
            train_stump([2, 2, 2, 2], [1, 1, -1, -1], np.ones(4) / 4)


class TestAdaBoost:
    def test_separable_single_round(self):
        X = np.array([[1.0], [2.0], [8.0], [9.0]])
        y = np.array([-1, -1, 1, 1])
        model = adaboost_train(X, y, np.ones(4), rounds=1)
        assert ensemble_error(model, X, y) == 0.0

    def test_four_point_fixture_beats_any_single_stump(self):
        # single-stump floor is 0.25 here; four rounds reach zero error
        X = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0], [1.0, 1.0]])
        y = np.array([1, 1, -1, -1])
        model = adaboost_train(X, y, np.ones(4), rounds=4, use_numba=False)
        single = brute_force_stump(X[:, 1], y, np.ones(4) / 4)[2]
        assert single == 0.25
        assert ensemble_error(model, X, y) < single
        # every round agrees with the independent reference boost
        ref = reference_adaboost(X, y, np.ones(4), 4)
        assert len(ref) == len(model.stumps)
        for stump, (f, theta, pol, alpha) in zip(model.stumps, ref):
            assert stump.feature == f
            assert np.isclose(stump.threshold, theta)
            assert stump.polarity == pol
            assert np.isclose(stump.alpha, alpha)

    def test_numba_and_numpy_paths_identical(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 25)).astype(np.float32)
        y = np.where(X[:, 3] + 0.3 * rng.normal(size=60) > 0, 1, -1)
        w = rng.uniform(0.1, 1.0, 60)
        a = adaboost_train(X, y, w, rounds=12, use_numba=False)
        b = adaboost_train(X, y, w, rounds=12, use_numba=True)
        assert a == b

    def test_matches_reference_on_random_data(self):
        rng = np.random.default_rng(11)
        X = rng.integers(0, 6, size=(25, 8)).astype(np.float32)  # ties likely
        y = np.where(X[:, 2] > 2.5, 1, -1)
        y[rng.random(25) < 0.2] *= -1
        if len(set(y)) < 2:
            y[0] = -y[0]
        w = rng.uniform(0.2, 1.0, 25)
        model = adaboost_train(X, y, w, rounds=6, use_numba=False)
        ref = reference_adaboost(X.astype(float), y, w, 6)
        assert len(model.stumps) == len(ref)
        for stump, (f, theta, pol, alpha) in zip(model.stumps, ref):
            assert (stump.feature, stump.polarity) == (f, pol)
            assert np.isclose(stump.threshold, theta)
            assert np.isclose(stump.alpha, alpha)

    def test_weight_scaling_invariance(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 10)).astype(np.float32)
        y = np.where(X[:, 1] > 0, 1, -1)
        w = rng.uniform(0.1, 1.0, 40)
        a = adaboost_train(X, y, w, rounds=5)
        b = adaboost_train(X, y, w * 37.5, rounds=5)
        assert a == b

    def test_zero_weight_samples_have_no_influence(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(30, 6)).astype(np.float32)
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=30) > 0, 1, -1)
        w = rng.uniform(0.1, 1.0, 30)
        w[::3] = 0.0
        keep = w > 0
        a = adaboost_train(X, y, w, rounds=5)
        b = adaboost_train(X[keep], y[keep], w[keep], rounds=5)
        assert a == b

    def test_per_round_error_below_half_and_bound(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(80, 15)).astype(np.float32)
        y = np.where(X[:, 4] + 0.8 * rng.normal(size=80) > 0, 1, -1)
        init = rng.uniform(0.5, 1.5, 80)
        model = adaboost_train(X, y, init, rounds=10)
        for eps in model.round_errors[: len(model.stumps)]:
            assert eps < 0.5
        # classic bound: weighted training error <= prod 2sqrt(eps(1-eps))
        w0 = init / init.sum()
        pred, _ = boost_predict(model, X)
        weighted_err = float(w0[pred != y].sum())
        bound = np.prod([2 * np.sqrt(e * (1 - e)) for e in model.round_errors[: len(model.stumps)]])
        assert weighted_err <= bound + 1e-12

    def test_weights_stay_normalized(self, monkeypatch):
        import fallkit.boosting as B

        sums = []
        original = B._best_stump_all

        def spy(X, order, signed_w, w_neg, use_numba):
            # signed_w = w*y, so |signed_w| sums to the current total weight
            sums.append(float(np.abs(signed_w).sum()))
            return original(X, order, signed_w, w_neg, use_numba)

        monkeypatch.setattr(B, "_best_stump_all", spy)
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 5)).astype(np.float32)
        y = np.where(X[:, 2] + rng.normal(size=30) > 0, 1, -1)
        adaboost_train(X, y, np.ones(30), rounds=6)
        assert sums and all(abs(s - 1.0) < 1e-9 for s in sums)

    def test_determinism(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 12)).astype(np.float32)
        y = np.where(X[:, 5] > 0, 1, -1)
        a = adaboost_train(X, y, np.ones(50), rounds=8)
        b = adaboost_train(X, y, np.ones(50), rounds=8)
        assert a == b

    def test_selected_features_bounded_by_rounds(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(100, 40)).astype(np.float32)
        y = np.where(X[:, :3].sum(1) + 0.5 * rng.normal(size=100) > 0, 1, -1)
        model = adaboost_train(X, y, np.ones(100), rounds=20)
        assert len(model.selected_features) <= len(model.stumps) <= 20
        assert set(model.selected_features) == {s.feature for s in model.stumps}

    def test_validation_errors(self):
        X = np.zeros((4, 2), dtype=np.float32)
        with pytest.raises(ValueError):
            adaboost_train(X, [1, 1, 1, 1], np.ones(4), rounds=2)
        with pytest.raises(ValueError):
            adaboost_train(X, [1, 1, -1, -1], np.zeros(4), rounds=2)
        with pytest.raises(ValueError):
            adaboost_train(X, [1, 1, -1, -1], np.ones(4), rounds=0)


class TestPredict:
    def test_empty_model_rejected(self):
        with pytest.raises(ValueError):
            boost_predict(BoostModel([], ()), np.zeros((2, 2)))

    def test_reproduces_training_labels_after_perfect_fit(self):
        X = np.array([[0.0, 5.0], [1.0, 4.0], [10.0, 5.0], [11.0, 7.0]], dtype=np.float32)
        y = np.array([-1, -1, 1, 1])
        model = adaboost_train(X, y, np.ones(4), rounds=3)
        pred, margins = boost_predict(model, X)
        assert np.array_equal(pred, y)
        assert np.all(np.sign(margins) == y)

    def test_sample_exactly_at_threshold_uses_ge(self):
        model = BoostModel([DecisionStump(0, 2.0, 1, alpha=1.0)], (0,))
        pred, margins = boost_predict(model, np.array([[2.0], [1.999]]))
        assert pred.tolist() == [1, -1]
        assert margins[0] == 1.0

    def test_margin_is_weighted_vote(self):
        model = BoostModel(
            [DecisionStump(0, 0.0, 1, alpha=0.7), DecisionStump(1, 0.0, -1, alpha=0.2)], (0, 1)
        )
        _, margins = boost_predict(model, np.array([[1.0, 1.0]]))
        assert np.isclose(margins[0], 0.7 - 0.2)

    def test_missing_column_detected(self):
        model = BoostModel([DecisionStump(5, 0.0, 1, alpha=1.0)], (5,))
        with pytest.raises(ValueError, match="missing"):
            boost_predict(model, np.zeros((2, 3)))

    def test_column_mapping_for_compact_matrices(self):
        model = BoostModel([DecisionStump(100, 1.0, 1, alpha=1.0)], (100,))
        X = np.array([[2.0], [0.0]])
        pred, _ = boost_predict(model, X, columns={100: 0})
        assert pred.tolist() == [1, -1]


class TestPersistence:
    def test_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 9)).astype(np.float32)
        y = np.where(X[:, 4] + 0.2 * rng.normal(size=40) > 0, 1, -1)
        model = adaboost_train(X, y, np.ones(40), rounds=7, bank_checksum="cafe01")
        save_boost_model(model, tmp_path / "m.txt")
        loaded = load_boost_model(tmp_path / "m.txt")
        assert loaded == model

    def test_bank_mismatch_detected(self, tmp_path):
        model = BoostModel([DecisionStump(0, 1.0, 1, 0.5)], (0,), bank_checksum="aaa")
        save_boost_model(model, tmp_path / "m.txt")
        with pytest.raises(ValueError, match="different filter bank"):
            load_boost_model(tmp_path / "m.txt", expect_bank_checksum="bbb")
