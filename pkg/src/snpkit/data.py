"""Ternary case-control data model: ingestion, validation, folds, resampling.

Predictors are coded 0/1/2 (for SNPs: no mutation / heterozygous /
homozygous); the phenotype is -1 (control) or +1 (case).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

GENETIC = "genetic"
EXTERNAL = "external"


class DataError(ValueError):
    """Malformed input data (bad cell value, unknown column, ...)."""


@dataclass(frozen=True)
class Dataset:
    """Immutable N x n ternary predictor matrix plus a +/-1 phenotype vector."""

    predictors: np.ndarray          # (N, n) int8, values in {0,1,2}
    phenotype: np.ndarray           # (N,) int8, values in {-1,+1}
    predictor_names: tuple = ()
    predictor_kind: tuple = ()      # per-column GENETIC or EXTERNAL

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.predictors, dtype=np.int8))
        y = np.ascontiguousarray(np.asarray(self.phenotype, dtype=np.int8))
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("predictor matrix must be N x n with N,n >= 1")
        if y.shape != (X.shape[0],):
            raise DataError("phenotype length does not match predictor rows")
        bad = ~np.isin(X, (0, 1, 2))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(f"non-ternary predictor value {X[r, c]} at row {r}, column {c}")
        if not np.isin(y, (-1, 1)).all():
            j = int(np.flatnonzero(~np.isin(y, (-1, 1)))[0])
            raise DataError(f"phenotype value {y[j]} at row {j} is not -1/+1")
        names = tuple(self.predictor_names) or tuple(f"X{i + 1}" for i in range(X.shape[1]))
        kinds = tuple(self.predictor_kind) or (GENETIC,) * X.shape[1]
        if len(names) != X.shape[1]:
            raise DataError("predictor_names length does not match column count")
        if len(set(names)) != len(names):
            raise DataError("predictor_names must be unique")
        if len(kinds) != X.shape[1] or not set(kinds) <= {GENETIC, EXTERNAL}:
            raise DataError("predictor_kind must tag every column genetic/external")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "phenotype", y)
        object.__setattr__(self, "predictor_names", names)
        object.__setattr__(self, "predictor_kind", kinds)

    @property
    def N(self) -> int:
        return self.predictors.shape[0]

    @property
    def n(self) -> int:
        return self.predictors.shape[1]

    def genetic_columns(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.predictor_kind) if k == GENETIC])

    def external_columns(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.predictor_kind) if k == EXTERNAL])

    def full_index(self) -> np.ndarray:
        """The subsample covering every row."""
        return np.arange(self.N)


@dataclass(frozen=True)
class FoldPlan:
    """K disjoint contiguous index blocks covering 0..N-1 (after any shuffle)."""

    K: int
    folds: tuple  # K arrays of row indices

    def complement(self, k: int, N: int) -> np.ndarray:
        mask = np.ones(N, dtype=bool)
        mask[self.folds[k]] = False
        return np.flatnonzero(mask)


def make_folds(N: int, K: int) -> FoldPlan:
    """Contiguous-block folds: fold k gets rows (k-1)[N/K]..k[N/K], last gets the tail."""
    if not 1 <= K <= N:
        raise ValueError(f"fold count K={K} must satisfy 1 <= K <= N={N}")
    q = N // K
    folds = []
    for k in range(1, K + 1):
        lo = (k - 1) * q
        hi = k * q if k < K else N
        folds.append(np.arange(lo, hi))
    return FoldPlan(K=K, folds=tuple(folds))


def shuffle_then_fold(ds: Dataset, K: int, seed) -> FoldPlan:
    """Apply a seeded uniform row permutation before the block fold formula."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.N)
    base = make_folds(ds.N, K)
    return FoldPlan(K=K, folds=tuple(perm[f] for f in base.folds))


def balance_resample(ds: Dataset, seed) -> Dataset:
    """Enlarge the minority class by bootstrap draws until case:control is 1:1."""
    y = ds.phenotype
    n_case = int((y == 1).sum())
    n_ctrl = int((y == -1).sum())
    if n_case == 0 or n_ctrl == 0:
        raise DataError("balance_resample needs both classes present")
    if n_case == n_ctrl:
        return ds
    minority = 1 if n_case < n_ctrl else -1
    pool = np.flatnonzero(y == minority)
    rng = np.random.default_rng(seed)
    extra = rng.choice(pool, size=abs(n_case - n_ctrl), replace=True)
    rows = np.concatenate([np.arange(ds.N), extra])
    return Dataset(
        predictors=ds.predictors[rows],
        phenotype=ds.phenotype[rows],
        predictor_names=ds.predictor_names,
        predictor_kind=ds.predictor_kind,
    )


def load_dataset(path, phenotype_column: str, *, genetic_columns=None,
                 external_columns=(), phenotype_coding: str = "pm1",
                 separator: str = ",") -> Dataset:
    """Read a delimited text file with a header row into a Dataset.

    ``phenotype_coding`` is ``"pm1"`` for on-disk -1/+1 labels or ``"01"``
    for 0/1 labels (0 maps to -1).  Columns not named in
    ``external_columns`` are tagged genetic; ``genetic_columns`` restricts
    the predictor set explicitly when given.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=separator)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = [[c.strip() for c in row] for row in reader if row and any(row)]

    if phenotype_column not in header:
        raise DataError(f"unknown phenotype column {phenotype_column!r}")
    if genetic_columns is None:
        pred_names = [h for h in header if h != phenotype_column]
    else:
        pred_names = list(genetic_columns) + [c for c in external_columns
                                              if c not in genetic_columns]
    for c in list(external_columns) + pred_names:
        if c not in header:
            raise DataError(f"unknown column {c!r}")
    col_of = {h: i for i, h in enumerate(header)}
    ext = set(external_columns)
    kinds = tuple(EXTERNAL if c in ext else GENETIC for c in pred_names)

    X = np.empty((len(rows), len(pred_names)), dtype=np.int8)
    y = np.empty(len(rows), dtype=np.int8)
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {r + 1}: expected {len(header)} fields, got {len(row)}")
        for j, c in enumerate(pred_names):
            cell = row[col_of[c]]
            if cell not in ("0", "1", "2"):
                raise DataError(f"row {r + 1}, column {c!r}: non-ternary value {cell!r}")
            X[r, j] = int(cell)
        raw = row[col_of[phenotype_column]]
        if phenotype_coding == "01":
            if raw not in ("0", "1"):
                raise DataError(f"row {r + 1}: phenotype {raw!r} not in {{0,1}}")
            y[r] = 1 if raw == "1" else -1
        else:
            if raw not in ("-1", "1", "+1"):
                raise DataError(f"row {r + 1}: phenotype {raw!r} not in {{-1,+1}}")
            y[r] = int(raw)
    if len(rows) == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(predictors=X, phenotype=y, predictor_names=tuple(pred_names),
                   predictor_kind=kinds)


def save_dataset(ds: Dataset, path, *, phenotype_column: str = "Y",
                 phenotype_coding: str = "pm1", separator: str = ",") -> None:
    """Write a Dataset back to the CSV-style format read by load_dataset."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=separator)
        w.writerow(list(ds.predictor_names) + [phenotype_column])
        for i in range(ds.N):
            lab = ds.phenotype[i]
            if phenotype_coding == "01":
                lab = 1 if lab == 1 else 0
            w.writerow([int(v) for v in ds.predictors[i]] + [int(lab)])
