import numpy as np
import pytest

from snpkit.data import Dataset, make_folds
from snpkit.mdr import mdr_trainer
from snpkit.metrics import cv_error
from snpkit.permtest import (PermTestResult, column_permutation_importance,
                             permutation_test)


def dataset(X, y):
    return Dataset(predictors=np.array(X), phenotype=np.array(y))


def signal_dataset(rng, N, n=3, noise=0.05):
    X = rng.integers(0, 3, size=(N, n))
    y = np.where(X[:, 0] >= 1, 1, -1)
    flip = rng.random(N) < noise
    y[flip] = -y[flip]
    if len(set(y.tolist())) == 1:
        y[0] = -y[0]
    return dataset(X, y)


def noise_dataset(rng, N, n=3):
    X = rng.integers(0, 3, size=(N, n))
    y = np.where(rng.random(N) < 0.5, 1, -1)
    y[0], y[1] = 1, -1
    return dataset(X, y)


class TestPermutationTest:
    def test_accuracy_bound(self):
        res = PermTestResult(observed_error=0.2, null_errors=np.zeros(100),
                             p_value=0.0, B=100, alpha=0.05, reject=True)
        assert res.accuracy_bound == pytest.approx(0.05)

    def test_p_value_grid(self):
        rng = np.random.default_rng(0)
        ds = noise_dataset(rng, 48)
        res = permutation_test(mdr_trainer((0,)), ds, make_folds(48, 4),
                               B=7, seed=1)
        assert res.p_value in {k / 7 for k in range(8)}

    def test_signal_rejected(self):
        rng = np.random.default_rng(1)
        ds = signal_dataset(rng, 120)
        res = permutation_test(mdr_trainer((0,)), ds, make_folds(120, 4),
                               B=30, seed=2)
        assert res.p_value < 0.05 and res.reject

    def test_null_not_rejected(self):
        rng = np.random.default_rng(2)
        ds = noise_dataset(rng, 120)
        res = permutation_test(mdr_trainer((0,)), ds, make_folds(120, 4),
                               B=30, seed=3)
        assert res.p_value > 0.05 and not res.reject

    def test_worker_invariance(self):
        rng = np.random.default_rng(3)
        ds = signal_dataset(rng, 60)
        plan = make_folds(60, 3)
        a = permutation_test(mdr_trainer((0,)), ds, plan, B=12, seed=4,
                             workers=1)
        b = permutation_test(mdr_trainer((0,)), ds, plan, B=12, seed=4,
                             workers=4)
        assert np.array_equal(a.null_errors, b.null_errors)
        assert a.p_value == b.p_value

    def test_observed_shortcut_consistent(self):
        rng = np.random.default_rng(4)
        ds = signal_dataset(rng, 60)
        plan = make_folds(60, 3)
        obs = cv_error(mdr_trainer((0,)), ds, plan, seed=5)
        a = permutation_test(mdr_trainer((0,)), ds, plan, B=10, seed=5)
        b = permutation_test(mdr_trainer((0,)), ds, plan, B=10, seed=5,
                             observed=obs)
        assert a.observed_error == b.observed_error
        assert np.array_equal(a.null_errors, b.null_errors)

    def test_bad_b_rejected(self):
        rng = np.random.default_rng(5)
        ds = noise_dataset(rng, 30)
        with pytest.raises(ValueError):
            permutation_test(mdr_trainer((0,)), ds, make_folds(30, 3), B=0)


class TestColumnImportance:
    def fixed_rule(self, column):
        return lambda X: np.where(np.atleast_2d(X)[:, column] >= 1, 1, -1)

    def test_used_column_hurts(self):
        rng = np.random.default_rng(6)
        ds = signal_dataset(rng, 400, noise=0.0)
        base_err = 0.0   # the rule is exactly the generating signal
        worse = column_permutation_importance(self.fixed_rule(0), ds, 0,
                                              R=5, seed=7)
        assert worse > base_err + 0.2

    def test_unused_column_no_effect(self):
        rng = np.random.default_rng(7)
        ds = signal_dataset(rng, 200)
        from snpkit.metrics import balanced_error_direct
        base = balanced_error_direct(self.fixed_rule(0), ds, ds.full_index())
        got = column_permutation_importance(self.fixed_rule(0), ds, 2,
                                            R=3, seed=8)
        assert got == pytest.approx(base)

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        ds = signal_dataset(rng, 100)
        a = column_permutation_importance(self.fixed_rule(0), ds, 0, R=4, seed=9)
        b = column_permutation_importance(self.fixed_rule(0), ds, 0, R=4, seed=9)
        assert a == b

    def test_validation(self):
        rng = np.random.default_rng(9)
        ds = signal_dataset(rng, 30)
        with pytest.raises(ValueError):
            column_permutation_importance(self.fixed_rule(0), ds, 5)
        with pytest.raises(ValueError):
            column_permutation_importance(self.fixed_rule(0), ds, 0, R=0)
