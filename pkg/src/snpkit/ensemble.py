"""Bagged CART forests, stochastic gradient boosting, and conditional
variable importance.

RF draws B bootstrap samples (default B = max([N ln N], 1000)), fits one
classification tree on each and averages votes into a probability that is
thresholded against the training prevalence.  SGB builds a staged additive
log-odds model from logistic pseudo-responses, growing each stage tree on
an eta-subsample and shrinking updates by the memory relaxation rho.  CVIM
scores a predictor by the out-of-bag accuracy lost when its column is
permuted within strata of its chi-square-dependent peers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2_contingency

from .cart import ClassTree, grow_tree_arrays, leaf_labels, tree_apply, tree_predict
from .data import Dataset
from .metrics import DegenerateClassError, prevalence

LOG_ODDS_CLAMP = 30.0


def default_rf_size(N: int) -> int:
    """B = max([N ln N], 1000), natural logarithm."""
    return max(int(N * math.log(N)), 1000)


@dataclass(frozen=True)
class RfModel:
    trees: tuple                 # B fitted ClassTrees
    bootstrap_indices: tuple     # the rows each tree saw
    threshold: float             # training prevalence
    B: int

    def predict(self, X):
        return rf_predict(self, X)


def _bootstrap_two_classes(rng, idx, y):
    """One with-replacement resample; a single-class draw is retried once."""
    for attempt in range(2):
        boot = rng.choice(idx, size=len(idx), replace=True)
        yb = y[boot]
        if (yb == 1).any() and (yb == -1).any():
            return boot
    raise DegenerateClassError("bootstrap replicate lost a class twice in a row")


def fit_rf(ds: Dataset, idx, B: int | None = None, D_max: int = 16,
           min_node: int = 5, seed=0, workers: int = 1) -> RfModel:
    """Bagging of CARTs over seeded bootstrap resamples of the subsample."""
    idx = np.asarray(idx)
    y = ds.phenotype
    if not ((y[idx] == 1).any() and (y[idx] == -1).any()):
        raise DegenerateClassError("RF fit needs both classes in the subsample")
    if B is None:
        B = default_rf_size(len(idx))
    master = np.random.SeedSequence(seed)
    boots = []
    for child in master.spawn(B):
        boots.append(_bootstrap_two_classes(np.random.default_rng(child), idx, y))

    def fit_one(boot):
        return grow_tree_arrays(ds.predictors[boot], y[boot],
                                D_max=D_max, min_node=min_node)

    if workers > 1:
        from joblib import Parallel, delayed
        trees = Parallel(n_jobs=workers)(delayed(fit_one)(b) for b in boots)
    else:
        trees = [fit_one(b) for b in boots]
    return RfModel(trees=tuple(trees), bootstrap_indices=tuple(boots),
                   threshold=prevalence(ds, idx), B=B)


def rf_prob(model: RfModel, X) -> np.ndarray:
    """(mean vote + 1)/2, a [0,1] estimate of the case probability."""
    X = np.atleast_2d(X)
    votes = np.zeros(X.shape[0])
    for tree in model.trees:
        votes += tree_predict(tree, X)
    return (votes / model.B + 1.0) / 2.0


def rf_predict(model: RfModel, X) -> np.ndarray:
    """+1 where the vote probability strictly exceeds the training prevalence."""
    return np.where(rf_prob(model, X) > model.threshold, 1, -1).astype(np.int8)


def rf_trainer(B: int | None = None, D_max: int = 16, min_node: int = 5,
               workers: int = 1):
    def train(ds, idx, seed):
        model = fit_rf(ds, idx, B=B, D_max=D_max, min_node=min_node,
                       seed=seed, workers=workers)
        return model.predict

    return train


# ---------------------------------------------------------------------------
# stochastic gradient boosting

@dataclass(frozen=True)
class SgbModel:
    f0: float
    stages: tuple        # (ClassTree structure, leaf weight vector) per stage
    rho: float
    eta: float
    D: int
    clamp_events: int

    def predict_raw(self, X) -> np.ndarray:
        """The staged additive log-odds-scale function f_M."""
        X = np.atleast_2d(X)
        f = np.full(X.shape[0], self.f0)
        for tree, w in self.stages:
            f += self.rho * w[tree_apply(tree, X)]
        return np.clip(f, -LOG_ODDS_CLAMP / 2, LOG_ODDS_CLAMP / 2)

    def predict_proba(self, X) -> np.ndarray:
        return sgb_prob(self, X)


def fit_sgb(ds: Dataset, idx, D: int = 4, M: int = 500, rho: float = 0.1,
            eta: float = 0.5, seed=0, min_node: int = 5,
            weights_on: str = "full") -> SgbModel:
    """Staged logistic boosting per the four-step recipe.

    Stage trees are grown on an [eta*#S]-row random subset, fitting the
    tree structure to sign(pseudo-response) with |pseudo-response| row
    weights; leaf weights are then computed from the pseudo-responses of
    the full subsample (``weights_on="subsample"`` restricts them to the
    eta-subset instead).
    """
    if not 0 < rho <= 1 or not 0 < eta <= 1:
        raise ValueError("need rho, eta in (0, 1]")
    if M < 1 or D < 1:
        raise ValueError("need M >= 1 stages and D >= 1 leaves")
    idx = np.asarray(idx)
    y = ds.phenotype[idx].astype(float)
    n_case = (y == 1).sum()
    n_ctrl = (y == -1).sum()
    if n_case == 0 or n_ctrl == 0:
        raise DegenerateClassError("SGB fit needs both classes")
    n_sub = int(eta * len(idx))
    if n_sub < 2 * D:
        raise ValueError(f"eta-subsample of {n_sub} rows cannot support {D} leaves")
    X = ds.predictors[idx]
    f0 = 0.5 * math.log(n_case / n_ctrl)
    f = np.full(len(idx), f0)
    rng = np.random.default_rng(seed)
    stages = []
    clamp_events = 0
    for _ in range(M):
        ybar = 2.0 * y / (1.0 + np.exp(2.0 * y * f))
        sub = rng.choice(len(idx), size=n_sub, replace=False)
        tree = grow_tree_arrays(X[sub], np.sign(ybar[sub]).astype(np.int8),
                                w=np.abs(ybar[sub]), D_max=D, min_node=min_node)
        rows = sub if weights_on == "subsample" else np.arange(len(idx))
        leaves = tree_apply(tree, X[rows])
        num = np.bincount(leaves, weights=ybar[rows], minlength=tree.n_leaves)
        den = np.bincount(leaves, weights=np.abs(ybar[rows]) * (2.0 - np.abs(ybar[rows])),
                          minlength=tree.n_leaves)
        # a converged leaf (all |ybar| near 0 or 2) freezes at weight 0
        w = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        stages.append((tree, w))
        f = f + rho * w[tree_apply(tree, X)]
        over = np.abs(f) > LOG_ODDS_CLAMP / 2
        clamp_events += int(over.sum())
        f = np.clip(f, -LOG_ODDS_CLAMP / 2, LOG_ODDS_CLAMP / 2)
    return SgbModel(f0=f0, stages=tuple(stages), rho=rho, eta=eta, D=D,
                    clamp_events=clamp_events)


def sgb_prob(model: SgbModel, X) -> np.ndarray:
    """1/(1+exp(-2 f_M)); the clamp keeps it strictly inside (0,1)."""
    return 1.0 / (1.0 + np.exp(-2.0 * model.predict_raw(X)))


def sgb_predict(model: SgbModel, X, threshold: float) -> np.ndarray:
    """+1 where the probability estimate strictly exceeds the threshold."""
    return np.where(sgb_prob(model, X) > threshold, 1, -1).astype(np.int8)


def sgb_trainer(D: int = 4, M: int = 500, rho: float = 0.1, eta: float = 0.5,
                min_node: int = 5, weights_on: str = "full"):
    def train(ds, idx, seed):
        model = fit_sgb(ds, idx, D=D, M=M, rho=rho, eta=eta, seed=seed,
                        min_node=min_node, weights_on=weights_on)
        thr = prevalence(ds, idx)
        return lambda X: sgb_predict(model, X, thr)

    return train


# ---------------------------------------------------------------------------
# conditional variable importance

def chi2_pvalue(a: np.ndarray, b: np.ndarray) -> float:
    """Chi-square independence p-value of two ternary columns.

    The 3x3 table drops empty rows/columns before the test; degenerate
    tables (a constant column) count as independent (p = 1).
    """
    table = np.zeros((3, 3))
    np.add.at(table, (a, b), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 1.0
    return float(chi2_contingency(table, correction=False).pvalue)


def conditioning_sets(ds: Dataset, level: float = 0.05) -> list:
    """Per predictor: the peers whose independence is rejected at ``level``.

    When the joint strata of the full set would outnumber N/2, only the
    single most-dependent peer is kept so strata stay populated.
    """
    X = ds.predictors
    n = ds.n
    pvals = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            pvals[i, j] = pvals[j, i] = chi2_pvalue(X[:, i], X[:, j])
    out = []
    for i in range(n):
        peers = [j for j in range(n) if j != i and pvals[i, j] < level]
        if peers:
            strata = np.unique(X[:, peers], axis=0).shape[0]
            if strata > ds.N / 2:
                peers = [min(peers, key=lambda j: (pvals[i, j], j))]
        out.append(tuple(peers))
    return out


def _stratified_permutation(rng, strata_codes: np.ndarray) -> np.ndarray:
    """A permutation of 0..N-1 acting within each stratum only."""
    perm = np.arange(len(strata_codes))
    for code in np.unique(strata_codes):
        rows = np.flatnonzero(strata_codes == code)
        perm[rows] = rows[rng.permutation(len(rows))]
    return perm


def _strata_codes(X, peers) -> np.ndarray:
    if not peers:
        return np.zeros(X.shape[0], dtype=np.int64)
    sub = X[:, list(peers)].astype(np.int64)
    return sub @ (3 ** np.arange(len(peers) - 1, -1, -1))


@dataclass(frozen=True)
class CvimReport:
    values: np.ndarray            # per-predictor CVIM
    conditioning: tuple           # per-predictor peer tuples
    replicate_values: np.ndarray  # (n, B) per-replicate CVIM_b (NaN = skipped)
    B: int
    effective_B: np.ndarray       # replicates actually used, per predictor

    def ranking(self) -> np.ndarray:
        return np.argsort(-self.values)


def cvim(ds: Dataset, B: int = 100, cond_level: float = 0.05, seed=0,
         D_max: int = 16, min_node: int = 5, workers: int = 1) -> CvimReport:
    """Average out-of-bag accuracy loss under within-strata column permutation.

    Per replicate: draw the stratified permutation for each predictor, fit
    one CART on a bootstrap sample, and compare out-of-bag accuracy on
    intact vs permuted predictor columns.  Replicates with an empty
    out-of-bag set are skipped and reported via ``effective_B``.
    """
    X = ds.predictors
    y = ds.phenotype
    N, n = X.shape
    cond = conditioning_sets(ds, level=cond_level)
    codes = [_strata_codes(X, peers) for peers in cond]
    master = np.random.SeedSequence(seed)

    def replicate(child):
        rng = np.random.default_rng(child)
        perms = [_stratified_permutation(rng, codes[i]) for i in range(n)]
        boot = rng.integers(0, N, size=N)
        oob = np.setdiff1d(np.arange(N), boot, assume_unique=False)
        if len(oob) == 0:
            return None
        tree = grow_tree_arrays(X[boot], y[boot], D_max=D_max, min_node=min_node)
        base_acc = float((tree_predict(tree, X[oob]) == y[oob]).mean())
        vals = np.empty(n)
        for i in range(n):
            Xp = X[oob].copy()
            Xp[:, i] = X[perms[i][oob], i]
            vals[i] = base_acc - float((tree_predict(tree, Xp) == y[oob]).mean())
        return vals

    children = master.spawn(B)
    if workers > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=workers)(delayed(replicate)(c) for c in children)
    else:
        results = [replicate(c) for c in children]

    rep = np.full((n, B), np.nan)
    for b, vals in enumerate(results):
        if vals is not None:
            rep[:, b] = vals
    eff = (~np.isnan(rep)).sum(axis=1)
    with np.errstate(invalid="ignore"):
        values = np.nanmean(rep, axis=1)
    return CvimReport(values=values, conditioning=tuple(cond),
                      replicate_values=rep, B=B, effective_B=eff)
