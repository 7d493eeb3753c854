"""Multifactor dimensionality reduction: exhaustive combination search.

The classic rule labels each multilocus cell high risk when its empirical
case rate strictly exceeds the marginal prevalence.  The independent-rule
variant (MDRIR) replaces the joint cell estimate by a product of
per-factor class-conditional frequencies obtained by Bayes inversion,
so sparse cells borrow strength from the marginals.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import Dataset, FoldPlan
from .metrics import CvError, DegenerateClassError, cv_error

CLASSIC = "classic"
INDEPENDENT = "independent-rule"


@dataclass(frozen=True)
class MdrModel:
    """Fitted risk rule over the 3^r cells of one factor combination."""

    combo: tuple                 # sorted column indices
    cell_labels: np.ndarray      # (3^r,) int8 in {-1,+1}
    threshold: float             # marginal case rate at fit time

    def __call__(self, X):
        X = np.atleast_2d(X)
        return self.cell_labels[_cell_index(X, self.combo)]


@dataclass(frozen=True)
class MdrSearchReport:
    """Every searched combination with its CV error, best first."""

    ranked: tuple                # ((combo, CvError), ...) ascending error
    n_combos: int
    variant: str

    @property
    def best(self):
        return self.ranked[0]


def _cell_index(X, combo):
    """Map rows to 0..3^r-1 by base-3 digits of the combo columns."""
    sub = np.asarray(X)[:, list(combo)].astype(np.int64)
    powers = 3 ** np.arange(len(combo) - 1, -1, -1)
    return sub @ powers


def _check_two_classes(y):
    if (y == 1).sum() == 0 or (y == -1).sum() == 0:
        raise DegenerateClassError("MDR fit needs both classes in the subsample")


def fit_mdr(ds: Dataset, idx, combo) -> MdrModel:
    """Classic MDR: cell goes high-risk iff its case rate beats the prevalence.

    Empty cells and exact ties classify -1.
    """
    combo = tuple(sorted(combo))
    idx = np.asarray(idx)
    y = ds.phenotype[idx]
    _check_two_classes(y)
    ncells = 3 ** len(combo)
    cells = _cell_index(ds.predictors[idx], combo)
    cases = np.bincount(cells[y == 1], minlength=ncells)
    total = np.bincount(cells, minlength=ncells)
    threshold = float((y == 1).mean())
    labels = np.full(ncells, -1, dtype=np.int8)
    seen = total > 0
    labels[seen] = np.where(cases[seen] > threshold * total[seen], 1, -1)
    return MdrModel(combo=combo, cell_labels=labels, threshold=threshold)


def fit_mdrir(ds: Dataset, idx, combo, smoothing: float = 0.0) -> MdrModel:
    """Independent-rule MDR: compare products of per-factor class conditionals.

    Cell x is high risk iff prod_i P(X_{k_i}=x_i | Y=1) strictly exceeds
    prod_i P(X_{k_i}=x_i | Y=-1).  ``smoothing`` adds the given count to
    every per-factor level tally (0 = raw frequencies, the default).
    """
    combo = tuple(sorted(combo))
    idx = np.asarray(idx)
    y = ds.phenotype[idx]
    _check_two_classes(y)
    r = len(combo)
    Xs = ds.predictors[idx][:, list(combo)]
    # per-factor conditional level frequencies, shape (r, 3) per class
    cond = {}
    for lab in (1, -1):
        rows = Xs[y == lab]
        freq = np.empty((r, 3))
        for i in range(r):
            counts = np.bincount(rows[:, i], minlength=3).astype(float) + smoothing
            freq[i] = counts / counts.sum()
        cond[lab] = freq
    ncells = 3 ** r
    labels = np.empty(ncells, dtype=np.int8)
    digits = np.array(np.unravel_index(np.arange(ncells), (3,) * r)).T
    prod_pos = np.prod(cond[1][np.arange(r), digits], axis=1)
    prod_neg = np.prod(cond[-1][np.arange(r), digits], axis=1)
    labels[:] = np.where(prod_pos > prod_neg, 1, -1)
    return MdrModel(combo=combo, cell_labels=labels,
                    threshold=float((y == 1).mean()))


def mdr_trainer(combo, variant: str = CLASSIC):
    """Trainer closure for the CV harness: fits the chosen variant on a subsample."""
    fit = fit_mdr if variant == CLASSIC else fit_mdrir

    def train(ds, idx, seed):
        return fit(ds, idx, combo)

    return train


def mdr_search(ds: Dataset, plan: FoldPlan, r_min: int, r_max: int,
               variant: str = CLASSIC, restrict=None, seed=0,
               max_cell_updates: float = 1e8, workers: int = 1) -> MdrSearchReport:
    """Score every factor combination of orders r_min..r_max by CV error.

    ``restrict`` limits the searched columns (e.g. genetic columns only).
    Refuses to run when the estimated work (combos x folds x N cell
    updates) exceeds ``max_cell_updates``.
    """
    if variant not in (CLASSIC, INDEPENDENT):
        raise ValueError(f"unknown MDR variant {variant!r}")
    cols = list(range(ds.n)) if restrict is None else sorted(restrict)
    if not 1 <= r_min <= r_max <= len(cols):
        raise ValueError("need 1 <= r_min <= r_max <= number of searched columns")
    combos = [c for r in range(r_min, r_max + 1) for c in combinations(cols, r)]
    work = len(combos) * plan.K * ds.N
    if work > max_cell_updates:
        raise ValueError(
            f"search size {len(combos)} combos x {plan.K} folds x {ds.N} rows "
            f"= {work:.2e} cell updates exceeds the cap {max_cell_updates:.0e}")

    def score(combo):
        return combo, cv_error(mdr_trainer(combo, variant), ds, plan, seed)

    if workers > 1:
        from joblib import Parallel, delayed
        scored = Parallel(n_jobs=workers)(delayed(score)(c) for c in combos)
    else:
        scored = [score(c) for c in combos]
    ranked = sorted(scored, key=lambda t: (t[1].value, t[0]))
    return MdrSearchReport(ranked=tuple(ranked), n_combos=len(combos), variant=variant)
