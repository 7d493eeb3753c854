import math

import numpy as np
import pytest

from snpkit.data import Dataset, EXTERNAL, GENETIC, make_folds
from snpkit.logicreg import (MODEL1, MODEL2, MODEL3, MODEL4, UNCONSTRAINED,
                             CoolingSchedule, FittedForest, Forest, anneal,
                             canonical, classify_move, complexity,
                             enumerate_forests, eval_tree, fit_beta,
                             forest_cv_error, geometric_schedule,
                             initial_forest, leaf, lr_predict, neighbors,
                             random_tree, score_L, tree_moves, tree_ok)
from snpkit.metrics import penalty


def dataset(X, y, kinds=()):
    return Dataset(predictors=np.array(X), phenotype=np.array(y),
                   predictor_kind=kinds)


def random_balanced(rng, N, n):
    X = rng.integers(0, 3, size=(N, n))
    y = np.where(rng.random(N) < 0.5, 1, -1)
    y[0], y[1] = 1, -1
    return dataset(X, y)


FIG_TREE = ("*", ("*", leaf(0), leaf(1)), ("+", leaf(2), leaf(3)))


class TestEvalTree:
    def test_worked_example(self):
        # (x1*x2)*(x3+x4) at (1,2,1,1): (1*2)=2, (1+1)=2, 2*2=4 -> 1
        assert eval_tree(FIG_TREE, np.array([[1, 2, 1, 1]]))[0] == 1

    def test_single_leaf_identity(self):
        X = np.array([[0], [1], [2]])
        assert list(eval_tree(leaf(0), X)) == [0, 1, 2]

    def test_mod3_table(self):
        X = np.array([[2, 2]])
        assert eval_tree(("+", leaf(0), leaf(1)), X)[0] == 1
        assert eval_tree(("*", leaf(0), leaf(1)), X)[0] == 1

    def test_range_and_commutativity(self):
        rng = np.random.default_rng(0)
        kinds = (GENETIC,) * 4
        for _ in range(2000):
            t = random_tree(rng, 4, 5, UNCONSTRAINED, kinds)
            X = rng.integers(0, 3, size=(5, 4))
            vals = eval_tree(t, X)
            assert ((vals >= 0) & (vals <= 2)).all()
            assert (eval_tree(canonical(t), X) == vals).all()

    def test_swap_children_invariant(self):
        rng = np.random.default_rng(1)
        X = rng.integers(0, 3, size=(20, 4))
        swapped = ("*", ("+", leaf(3), leaf(2)), ("*", leaf(1), leaf(0)))
        assert (eval_tree(FIG_TREE, X) == eval_tree(swapped, X)).all()


class TestScore:
    def test_beta_zero_value(self):
        rng = np.random.default_rng(2)
        ds = random_balanced(rng, 20, 3)
        idx = ds.full_index()
        F = Forest(trees=(leaf(0),))
        got = score_L(F, [0.0, 0.0], ds, idx)
        psi = np.where(ds.phenotype == 1, penalty(ds, idx, 1), penalty(ds, idx, -1))
        assert got == pytest.approx(float(psi.mean()))  # phi(0) = log2(2) = 1

    def test_separating_scale_decreases(self):
        X = np.array([[0], [0], [2], [2]])
        y = np.array([-1, -1, 1, 1])
        ds = dataset(X, y)
        F = Forest(trees=(leaf(0),))
        # h = -1 + x0: separates with margin 1
        a = score_L(F, [-1.0, 1.0], ds, ds.full_index())
        b = score_L(F, [-10.0, 10.0], ds, ds.full_index())
        assert b < a

    def test_hand_arithmetic_four_rows(self):
        X = np.array([[0], [1], [2], [1]])
        y = np.array([-1, 1, 1, -1])
        ds = dataset(X, y)
        F = Forest(trees=(leaf(0),))
        beta = [0.5, -0.25]
        h = 0.5 - 0.25 * X[:, 0]
        want = np.mean([math.log2(1 + math.exp(-yy * hh)) * 0.5
                        for yy, hh in zip(y, h)])
        got = score_L(F, beta, ds, ds.full_index())
        assert got == pytest.approx(want, abs=1e-12)


class TestFitBeta:
    def test_gradient_matches_finite_differences(self):
        from snpkit.logicreg import _design, _loss_grad_hess, _weights
        rng = np.random.default_rng(3)
        kinds = (GENETIC,) * 4
        for _ in range(100):
            ds = random_balanced(rng, int(rng.integers(10, 40)), 4)
            s = int(rng.integers(1, 4))
            F = Forest(trees=tuple(random_tree(rng, 4, 4, UNCONSTRAINED, kinds)
                                   for _ in range(s)))
            beta = rng.normal(scale=1.0, size=s + 1)
            idx = ds.full_index()
            Z = _design(F, ds.predictors)
            y = ds.phenotype.astype(float)
            psi = _weights(ds, idx)
            _, grad, _ = _loss_grad_hess(Z, y, psi, beta)
            eps = 1e-6
            for j in range(s + 1):
                e = np.zeros(s + 1)
                e[j] = eps
                num = (score_L(F, beta + e, ds, idx)
                       - score_L(F, beta - e, ds, idx)) / (2 * eps)
                denom = max(abs(num), abs(grad[j]), 1e-8)
                assert abs(num - grad[j]) / denom < 1e-5

    def test_never_worse_than_zero(self):
        rng = np.random.default_rng(4)
        kinds = (GENETIC,) * 3
        for _ in range(30):
            ds = random_balanced(rng, 25, 3)
            F = Forest(trees=(random_tree(rng, 3, 3, UNCONSTRAINED, kinds),))
            fit = fit_beta(F, ds, ds.full_index())
            base = score_L(F, np.zeros(2), ds, ds.full_index())
            assert fit.score <= base + 1e-12

    def test_constant_feature_degenerate(self):
        X = np.zeros((10, 2), dtype=int)
        X[:, 1] = np.arange(10) % 3
        y = np.where(np.arange(10) % 2 == 0, 1, -1)
        ds = dataset(X, y)
        F = Forest(trees=(leaf(0),))  # constant-zero feature
        fit = fit_beta(F, ds, ds.full_index())
        assert np.isfinite(fit.beta).all()

    def test_recovers_logistic_coefficients(self):
        rng = np.random.default_rng(5)
        N = 2000
        X = rng.integers(0, 3, size=(N, 1))
        true = (-1.0, 1.2)
        h = true[0] + true[1] * X[:, 0]
        y = np.where(rng.random(N) < 1 / (1 + np.exp(-h)), 1, -1)
        ds = dataset(X, y)
        F = Forest(trees=(leaf(0),))
        fit = fit_beta(F, ds, ds.full_index())
        # class weighting shifts the intercept; the slope must come back
        assert fit.beta[1] == pytest.approx(true[1], abs=3 * 0.08)

    def test_separable_labels_still_correct(self):
        X = np.array([[0], [0], [2], [2]] * 3)
        y = np.array([-1, -1, 1, 1] * 3)
        ds = dataset(X, y)
        F = Forest(trees=(leaf(0),))
        fit = fit_beta(F, ds, ds.full_index())
        assert (fit.predict(X) == y).all()


class TestLrPredict:
    def test_tie_is_low_risk(self):
        F = Forest(trees=(leaf(0),))
        fit = FittedForest(forest=F, beta=np.array([0.0, 0.0]), score=0.0,
                           converged=True)
        assert lr_predict(fit, [[2]])[0] == -1

    def test_large_intercept_constant(self):
        F = Forest(trees=(leaf(0),))
        fit = FittedForest(forest=F, beta=np.array([5.0, 0.0]), score=0.0,
                           converged=True)
        assert (lr_predict(fit, [[0], [1], [2]]) == 1).all()

    def test_hand_labels(self):
        F = Forest(trees=(leaf(0),))
        fit = FittedForest(forest=F, beta=np.array([-1.0, 1.0]), score=0.0,
                           converged=True)
        assert list(lr_predict(fit, [[0], [1], [2]])) == [-1, -1, 1]


class TestMoves:
    kinds4 = (GENETIC,) * 4

    def test_single_leaf_legal_moves(self):
        moves = tree_moves(leaf(0), 4, 4, UNCONSTRAINED, self.kinds4)
        names = {nm for nm, _ in moves}
        assert names == {"variable-change", "split-leaf"}

    def test_split_keeps_variable(self):
        moves = tree_moves(leaf(2), 4, 4, UNCONSTRAINED, self.kinds4)
        for nm, t in moves:
            if nm == "split-leaf":
                assert 2 in {t[1][1], t[2][1]}

    def test_every_neighbor_classifies_to_one_move(self):
        # the same neighbor can arise from two moves (e.g. splitting a leaf
        # vs. growing the branch above it); the classifier must pick one of
        # the generating moves, deterministically
        rng = np.random.default_rng(6)
        for _ in range(500):
            t = random_tree(rng, 4, 4, UNCONSTRAINED, self.kinds4)
            moves = tree_moves(t, 4, 5, UNCONSTRAINED, self.kinds4)
            by_tree = {}
            for nm, t_new in moves:
                by_tree.setdefault(t_new, set()).add(nm)
            for t_new, names in by_tree.items():
                got = classify_move(t, t_new)
                assert got in names, (t, t_new, names, got)

    def test_neighbor_forest_differs_in_one_tree(self):
        rng = np.random.default_rng(7)
        kinds = (GENETIC,) * 3
        F = Forest(trees=(leaf(0), leaf(1), ("*", leaf(0), leaf(2))))
        for _ in range(100):
            Fp = neighbors(F, 4, kinds, rng)
            diff = [i for i in range(3) if F.trees[i] != Fp.trees[i]]
            assert len(diff) == 1
            i = diff[0]
            assert classify_move(F.trees[i], Fp.trees[i]) is not None

    def test_complexity_respected(self):
        rng = np.random.default_rng(8)
        kinds = (GENETIC,) * 3
        F = Forest(trees=(random_tree(rng, 3, 3, UNCONSTRAINED, kinds),))
        for _ in range(200):
            F = neighbors(F, 3, kinds, rng)
            assert F.complexity() <= 3

    def test_model1_excludes_external_in_big_trees(self):
        kinds = (GENETIC, GENETIC, EXTERNAL)
        t = ("*", leaf(0), leaf(1))
        moves = tree_moves(t, 3, 4, MODEL1, kinds)
        for nm, t_new in moves:
            from snpkit.logicreg import tree_vars, is_leaf
            if not is_leaf(t_new):
                assert 2 not in tree_vars(t_new)

    def test_model2_predicate(self):
        kinds = (GENETIC, GENETIC, EXTERNAL)
        good = ("*", leaf(2), leaf(0))          # external * genetic leaf
        bad_op = ("+", leaf(2), leaf(0))
        bad_sib = ("*", leaf(2), ("*", leaf(0), leaf(1)))
        assert tree_ok(good, MODEL2, kinds)
        assert not tree_ok(bad_op, MODEL2, kinds)
        assert not tree_ok(bad_sib, MODEL2, kinds)
        assert not tree_ok(leaf(2), MODEL2, kinds)
        assert tree_ok(leaf(0), MODEL2, kinds)

    def test_model3_model4(self):
        kinds = (GENETIC, EXTERNAL)
        assert tree_ok(leaf(1), MODEL3, kinds) and not tree_ok(leaf(0), MODEL3, kinds)
        assert tree_ok(leaf(0), MODEL4, kinds) and not tree_ok(leaf(1), MODEL4, kinds)

    def test_connectivity_tiny_space(self):
        # n=2, s=1, r_max=2: breadth-first reachability covers every forest
        kinds = (GENETIC, GENETIC)
        all_forests = enumerate_forests(2, 1, 2)
        keys = {F.key() for F in all_forests}
        start = Forest(trees=(leaf(0),))
        seen = {start.key()}
        frontier = [start]
        while frontier:
            F = frontier.pop()
            for nm, t in tree_moves(F.trees[0], 2, 2, UNCONSTRAINED, kinds):
                Fp = Forest(trees=(t,))
                if Fp.key() not in seen:
                    seen.add(Fp.key())
                    frontier.append(Fp)
        assert keys <= seen


class TestAnneal:
    def make_ds(self, seed=9, N=60):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 3, size=(N, 3))
        y = np.where((X[:, 0] * X[:, 1]) % 3 > 0, 1, -1)
        flip = rng.random(N) < 0.1
        y[flip] = -y[flip]
        if len(set(y)) == 1:
            y[0] = -y[0]
        return dataset(X, y)

    def test_zero_like_temperature_descends(self):
        ds = self.make_ds()
        plan = make_folds(ds.N, 3)
        sched = CoolingSchedule(T0=1e-12, gamma=0.5, steps=150)
        rng = np.random.default_rng(0)
        init = initial_forest(rng, 1, 3, 2, UNCONSTRAINED, ds.predictor_kind)
        init_err = forest_cv_error(init, ds, plan)
        fit, trace = anneal(ds, plan, s=1, r_max=2, schedule=sched, seed=1,
                            init=init)
        assert fit.cv.value <= init_err + 1e-12

    def test_matches_exhaustive_optimum(self):
        ds = self.make_ds()
        plan = make_folds(ds.N, 3)
        best = min(forest_cv_error(F, ds, plan)
                   for F in enumerate_forests(3, 1, 2))
        sched = geometric_schedule(T0=0.2, steps=400)
        fit, _ = anneal(ds, plan, s=1, r_max=2, schedule=sched, seed=5)
        assert fit.cv.value == pytest.approx(best, abs=1e-12)

    def test_best_visited_not_final(self):
        # high temperature wanders away; the answer is still the best visited
        ds = self.make_ds()
        plan = make_folds(ds.N, 3)
        sched = CoolingSchedule(T0=5.0, gamma=1.0, steps=300)
        fit, trace = anneal(ds, plan, s=1, r_max=2, schedule=sched, seed=2)
        assert fit.cv.value <= min(trace.errors) + 1e-12

    def test_bad_schedule_rejected(self):
        with pytest.raises(ValueError):
            CoolingSchedule(T0=0.0, gamma=0.9, steps=10)

    def test_deterministic(self):
        ds = self.make_ds()
        plan = make_folds(ds.N, 3)
        sched = geometric_schedule(T0=0.2, steps=100)
        a, _ = anneal(ds, plan, s=1, r_max=2, schedule=sched, seed=3)
        b, _ = anneal(ds, plan, s=1, r_max=2, schedule=sched, seed=3)
        assert a.forest.key() == b.forest.key()
        assert np.allclose(a.beta, b.beta)

    def test_model1_keeps_external_tail(self):
        rng = np.random.default_rng(11)
        X = rng.integers(0, 3, size=(40, 4))
        y = np.where(rng.random(40) < 0.5, 1, -1)
        y[:2] = [1, -1]
        kinds = (GENETIC, GENETIC, GENETIC, EXTERNAL)
        ds = dataset(X, y, kinds)
        plan = make_folds(40, 4)
        sched = geometric_schedule(T0=0.2, steps=50)
        fit, _ = anneal(ds, plan, s=2, r_max=2, constraint=MODEL1,
                        schedule=sched, seed=4)
        assert fit.forest.s == 3
        assert fit.forest.trees[2] == leaf(3)   # fixed external slot
        from snpkit.logicreg import tree_vars
        for t in fit.forest.trees[:2]:
            assert 3 not in tree_vars(t)
