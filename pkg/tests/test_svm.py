import numpy as np
import pytest

from fallkit.svm import (
    kkt_subgradient_norm,
    load_svm_model,
    save_svm_model,
    train_weighted_svm,
    true_objective,
)

# 2-D separable toy: two points per class
TOY_X = np.array([[0.0, 0.0], [1.0, 0.5], [4.0, 4.0], [5.0, 3.5]])
TOY_Y = np.array([-1, -1, 1, 1])


def models_close(a, b, atol=1e-4):
    return (
        a.kept == b.kept
        and np.allclose(a.w, b.w, atol=atol)
        and np.isclose(a.b, b.b, atol=atol)
        and np.allclose(a.mean, b.mean, atol=atol)
        and np.allclose(a.std, b.std, atol=atol)
    )


class TestTraining:
    def test_separable_toy_zero_hinge(self):
        model = train_weighted_svm(TOY_X, TOY_Y, np.ones(4), C=10.0)
        margins = model.decision(TOY_X)
        assert np.all(np.sign(margins) == TOY_Y)
        hinge = np.maximum(0.0, 1.0 - TOY_Y * margins)
        assert hinge.max() < 1e-3

    def test_zero_weight_sample_equals_removal(self):
        # mislabeled interloper with g=0 -> identical boundary to retraining without it
        X = np.vstack([TOY_X, [[4.5, 3.8]]])
        y = np.append(TOY_Y, -1)  # mislabeled inside the +1 cluster
        g = np.array([1.0, 1.0, 1.0, 1.0, 0.0])
        with_zero = train_weighted_svm(X, y, g, C=1.0, tol=1e-10)
        without = train_weighted_svm(TOY_X, TOY_Y, np.ones(4), C=1.0, tol=1e-10)
        assert models_close(with_zero, without, atol=1e-4)

    def test_g_scaling_against_c_identity(self):
        a = train_weighted_svm(TOY_X, TOY_Y, np.ones(4) * 10.0, C=0.1, tol=1e-10)
        b = train_weighted_svm(TOY_X, TOY_Y, np.ones(4), C=1.0, tol=1e-10)
        assert models_close(a, b, atol=1e-6)

    def test_objective_trace_non_increasing(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(60, 5))
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=60) > 0, 1, -1)
        g = rng.uniform(0.2, 2.0, size=60)
        model = train_weighted_svm(X, y, g, C=2.0)
        trace = np.array(model.objective_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) <= 1e-9)

    def test_kkt_subgradient_norm_small(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 3))
        y = np.where(X[:, 1] + 0.3 * rng.normal(size=40) > 0, 1, -1)
        g = rng.uniform(0.5, 1.5, size=40)
        model = train_weighted_svm(X, y, g, C=1.0, tol=1e-12, max_epochs=40)
        assert kkt_subgradient_norm(model, X, y, g, C=1.0) < 1e-3

    def test_g_continuity_smoke(self):
        g = np.ones(4)
        base = train_weighted_svm(TOY_X, TOY_Y, g, C=1.0, tol=1e-10)
        g2 = g.copy()
        g2[0] += 1e-6
        perturbed = train_weighted_svm(TOY_X, TOY_Y, g2, C=1.0, tol=1e-10)
        delta = np.linalg.norm(np.append(base.w - perturbed.w, base.b - perturbed.b))
        assert delta < 1e-2

    def test_raising_weight_of_misclassified_sample_reduces_its_hinge(self):
        # overlapping classes; one -1 point sits inside the +1 cluster
        X = np.vstack([TOY_X, [[4.2, 3.6]]])
        y = np.append(TOY_Y, -1)
        low = train_weighted_svm(X, y, np.array([1, 1, 1, 1, 0.5]), C=1.0, tol=1e-10)
        high = train_weighted_svm(X, y, np.array([1, 1, 1, 1, 8.0]), C=1.0, tol=1e-10)

        def hinge_of_last(model):
            m = y[-1] * model.decision(X[-1])
            return max(0.0, 1.0 - m)

        assert hinge_of_last(high) <= hinge_of_last(low) + 1e-9

    def test_determinism(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 4))
        y = np.where(X[:, 2] > 0, 1, -1)
        g = rng.uniform(0.1, 1.0, 30)
        a = train_weighted_svm(X, y, g)
        b = train_weighted_svm(X, y, g)
        assert models_close(a, b, atol=0.0)

    def test_zero_variance_feature_dropped_with_record(self):
        X = np.column_stack([TOY_X, np.full(4, 3.3)])
        model = train_weighted_svm(X, TOY_Y, np.ones(4))
        assert model.dropped == (2,)
        assert model.kept == (0, 1)
        assert np.all(model.std > 0)
        model.decision(X)  # full-width input still accepted

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            train_weighted_svm(TOY_X, np.ones(4), np.ones(4))  # single class
        with pytest.raises(ValueError):
            train_weighted_svm(TOY_X, TOY_Y, np.ones(4), C=0.0)
        bad = TOY_X.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            train_weighted_svm(bad, TOY_Y, np.ones(4))
        with pytest.raises(ValueError):
            train_weighted_svm(TOY_X, TOY_Y, np.array([1.0, 1, 1, -0.5]))


class TestDecision:
    def test_margin_zero_is_non_fall(self):
        model = train_weighted_svm(TOY_X, TOY_Y, np.ones(4))
        model.w[:] = 0.0
        model.b = 0.0
        assert model.predict(TOY_X[0]) == -1
        assert model.decision(TOY_X[0]) == 0.0

    def test_sign_matches_labels_on_separable_fit(self):
        model = train_weighted_svm(TOY_X, TOY_Y, np.ones(4), C=10.0)
        assert np.array_equal(model.predict(TOY_X), TOY_Y)

    def test_margin_affine_in_input(self):
        model = train_weighted_svm(TOY_X, TOY_Y, np.ones(4))
        x1, x2 = TOY_X[0], TOY_X[2]
        for alpha in (0.0, 0.3, 0.78, 1.0):
            mix = alpha * x1 + (1 - alpha) * x2
            expect = alpha * model.decision(x1) + (1 - alpha) * model.decision(x2)
            assert np.isclose(model.decision(mix), expect, atol=1e-9)

    def test_dimension_mismatch(self):
        model = train_weighted_svm(TOY_X, TOY_Y, np.ones(4))
        with pytest.raises(ValueError):
            model.decision(np.zeros(3))


class TestPersistence:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(20, 6))
        X[:, 4] = 1.0  # becomes a dropped feature
        y = np.where(X[:, 0] > 0, 1, -1)
        model = train_weighted_svm(X, y, np.ones(20), bank_checksum="abc", selection_checksum="def")
        save_svm_model(model, tmp_path / "svm.txt")
        loaded = load_svm_model(tmp_path / "svm.txt")
        assert loaded.dim == model.dim
        assert loaded.kept == model.kept
        assert loaded.dropped == model.dropped
        assert loaded.b == model.b
        assert np.array_equal(loaded.w, model.w)
        assert np.array_equal(loaded.mean, model.mean)
        assert np.array_equal(loaded.std, model.std)
        assert loaded.bank_checksum == "abc"
        assert loaded.selection_checksum == "def"
        assert np.array_equal(loaded.decision(X), model.decision(X))

    def test_bank_mismatch_detected(self, tmp_path):
        model = train_weighted_svm(TOY_X, TOY_Y, np.ones(4), bank_checksum="aaa")
        save_svm_model(model, tmp_path / "svm.txt")
        with pytest.raises(ValueError, match="different filter bank"):
            load_svm_model(tmp_path / "svm.txt", expect_bank_checksum="bbb")
