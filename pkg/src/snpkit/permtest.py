"""Permutation significance testing and Monte Carlo p-values.

Two semantics are exposed: ``permutation_test`` retrains the model on
every phenotype-permuted replicate (the full CV-under-the-null test),
while ``column_permutation_importance`` keeps a fitted prediction function
fixed and permutes a single predictor column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FoldPlan
from .metrics import CvError, DegenerateClassError, balanced_error_direct, cv_error


@dataclass(frozen=True)
class PermTestResult:
    observed_error: float
    null_errors: np.ndarray
    p_value: float
    B: int
    alpha: float
    reject: bool

    @property
    def accuracy_bound(self) -> float:
        """Worst-case Monte Carlo error of the p-value: 1/(2 sqrt(B))."""
        return 1.0 / (2.0 * math.sqrt(self.B))


def _permuted(ds: Dataset, perm) -> Dataset:
    return Dataset(predictors=ds.predictors, phenotype=ds.phenotype[perm],
                   predictor_names=ds.predictor_names,
                   predictor_kind=ds.predictor_kind)


def permutation_test(train, ds: Dataset, plan: FoldPlan, B: int = 100,
                     alpha: float = 0.05, seed=0, workers: int = 1,
                     observed: CvError | None = None) -> PermTestResult:
    """Monte Carlo permutation test of a trainer's CV error.

    Each replicate permutes the phenotype uniformly (predictors fixed),
    recomputes the K-fold error with full retraining, and the p-value is
    the fraction of null errors <= the observed one.  Replicate seeds
    derive from the master seed by replicate index, so results are
    independent of worker count; a replicate whose fold layout loses a
    class is redrawn once, a second failure is a hard error.
    """
    if B < 1:
        raise ValueError("need B >= 1 replicates")
    if observed is None:
        observed = cv_error(train, ds, plan, seed)
    master = np.random.SeedSequence(seed)
    children = master.spawn(B)

    def replicate(child):
        # Fisher-Yates via the generator's permutation; one retry on a
        # degenerate fold layout
        rng = np.random.default_rng(child)
        for attempt in range(2):
            perm = rng.permutation(ds.N)
            try:
                return cv_error(train, _permuted(ds, perm), plan, seed).value
            except DegenerateClassError:
                if attempt == 1:
                    raise
        raise AssertionError("unreachable")

    if workers > 1:
        from joblib import Parallel, delayed
        nulls = Parallel(n_jobs=workers)(delayed(replicate)(c) for c in children)
    else:
        nulls = [replicate(c) for c in children]
    nulls = np.asarray(nulls)
    p_value = float((nulls <= observed.value).mean())
    return PermTestResult(observed_error=observed.value, null_errors=nulls,
                          p_value=p_value, B=B, alpha=alpha,
                          reject=p_value < alpha)


def column_permutation_importance(predict, ds: Dataset, column: int,
                                  R: int = 1, seed=0) -> float:
    """Balanced error of a fixed predictor after permuting one column.

    Averages ``balanced_error_direct`` over R seeded uniform permutations
    of the chosen predictor column on the full sample.
    """
    if not 0 <= column < ds.n:
        raise ValueError(f"column {column} out of range")
    if R < 1:
        raise ValueError("need R >= 1 repeats")
    master = np.random.SeedSequence(seed)
    idx = ds.full_index()
    total = 0.0
    for child in master.spawn(R):
        rng = np.random.default_rng(child)
        X = ds.predictors.copy()
        X[:, column] = X[rng.permutation(ds.N), column]
        perm_ds = Dataset(predictors=X, phenotype=ds.phenotype,
                          predictor_names=ds.predictor_names,
                          predictor_kind=ds.predictor_kind)
        total += balanced_error_direct(predict, perm_ds, idx)
    return total / R
