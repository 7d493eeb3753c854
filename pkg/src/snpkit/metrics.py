"""Balanced prediction error, penalty weights and the K-fold CV harness.

Every method in the package produces a *prediction function*: a vectorized
callable mapping an (m, n) block of ternary rows to +/-1 labels.  A
*trainer* is a callable ``train(ds, idx, seed) -> prediction function``
that uses only the rows in ``idx``.  The balanced error averages the two
class-conditional miss rates, so rare-class mistakes weigh more.

Tie convention used package-wide: whenever an estimate is compared to a
threshold, equality classifies -1 (low risk), and undefined empirical
probabilities (empty cells) never exceed any threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FoldPlan


class DegenerateClassError(ValueError):
    """A subsample, fold, or training complement lacks one of the classes."""


@dataclass(frozen=True)
class CvError:
    """K-fold cross-validated balanced error with per-fold detail.

    ``per_fold[k]`` holds the fold-k miss rates (controls misread as cases,
    cases misread as controls).
    """

    value: float
    per_fold: tuple
    K: int


def penalty(ds: Dataset, idx, label: int) -> float:
    """Class weight 1/(4 * fraction of `label` rows in the subsample)."""
    y = ds.phenotype[np.asarray(idx)]
    frac = float((y == label).mean())
    if frac == 0.0:
        raise DegenerateClassError(f"class {label:+d} absent from subsample")
    return 1.0 / (4.0 * frac)


def prevalence(ds: Dataset, idx) -> float:
    """Empirical case fraction on the subsample."""
    return float((ds.phenotype[np.asarray(idx)] == 1).mean())


def empirical_cell_prob(ds: Dataset, idx, x):
    """Case fraction among subsample rows exactly equal to x; None if no row matches."""
    idx = np.asarray(idx)
    match = (ds.predictors[idx] == np.asarray(x, dtype=np.int8)).all(axis=1)
    total = int(match.sum())
    if total == 0:
        return None
    return float((ds.phenotype[idx][match] == 1).sum() / total)


def empirical_set_prob(ds: Dataset, idx, member):
    """Case fraction among subsample rows with X in C; None if C catches no row.

    ``member`` takes an (m, n) block of rows and returns a boolean mask.
    """
    idx = np.asarray(idx)
    mask = np.asarray(member(ds.predictors[idx]), dtype=bool)
    total = int(mask.sum())
    if total == 0:
        return None
    return float((ds.phenotype[idx][mask] == 1).sum() / total)


def balanced_error_direct(predict, ds: Dataset, idx) -> float:
    """Half the control false-positive rate plus half the case false-negative rate."""
    idx = np.asarray(idx)
    y = ds.phenotype[idx]
    if (y == 1).sum() == 0 or (y == -1).sum() == 0:
        raise DegenerateClassError("balanced error needs both classes in the subsample")
    yhat = np.asarray(predict(ds.predictors[idx]))
    fp = float((yhat[y == -1] == 1).mean())
    fn = float((yhat[y == 1] == -1).mean())
    return 0.5 * fp + 0.5 * fn


def optimal_rule(p, prev: float):
    """Prediction function +1 exactly where p(x) strictly exceeds the prevalence.

    ``p`` maps one row (tuple of ternary values) to a probability or None;
    None (empty cell) classifies -1.
    """
    if not 0.0 < prev < 1.0:
        raise ValueError("prevalence must lie strictly inside (0,1)")

    def predict(X):
        X = np.atleast_2d(X)
        out = np.full(X.shape[0], -1, dtype=np.int8)
        for i, row in enumerate(X):
            px = p(tuple(int(v) for v in row))
            if px is not None and px > prev:
                out[i] = 1
        return out

    return predict


def fold_miss_rates(predict, ds: Dataset, fold_idx) -> tuple:
    """Class-conditional miss rates of a fitted predictor on one fold."""
    y = ds.phenotype[fold_idx]
    n_ctrl = int((y == -1).sum())
    n_case = int((y == 1).sum())
    if n_ctrl == 0 or n_case == 0:
        raise DegenerateClassError("fold lacks one of the classes")
    yhat = np.asarray(predict(ds.predictors[fold_idx]))
    return (float((yhat[y == -1] == 1).sum() / n_ctrl),
            float((yhat[y == 1] == -1).sum() / n_case))


def cv_error(train, ds: Dataset, plan: FoldPlan, seed=0) -> CvError:
    """K-fold estimated balanced error of a trainer.

    For each fold the trainer is fit on the complement and scored on the
    fold; per-class miss rates are averaged over folds first, then the two
    classes are averaged.  Per-fold sums use math.fsum in fold order so the
    result does not depend on evaluation scheduling.
    """
    N = ds.N
    per_fold = []
    for k in range(plan.K):
        fold = plan.folds[k]
        comp = plan.complement(k, N)
        yc = ds.phenotype[comp]
        if (yc == 1).sum() == 0 or (yc == -1).sum() == 0:
            raise DegenerateClassError(f"training complement of fold {k} lacks a class")
        yf = ds.phenotype[fold]
        if (yf == 1).sum() == 0 or (yf == -1).sum() == 0:
            raise DegenerateClassError(f"fold {k} lacks a class")
        predict = train(ds, comp, seed)
        per_fold.append(fold_miss_rates(predict, ds, fold))
    miss_ctrl = math.fsum(r[0] for r in per_fold) / plan.K
    miss_case = math.fsum(r[1] for r in per_fold) / plan.K
    return CvError(value=0.5 * (miss_ctrl + miss_case),
                   per_fold=tuple(per_fold), K=plan.K)
