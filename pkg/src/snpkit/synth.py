"""Synthetic case-control generator with planted effects.

Predictors are drawn independently from per-column ternary frequencies;
the disease probability starts at a baseline and is combined with the
penetrance of each planted factor combination (``max`` by default), after
which labels may be flipped with a small noise probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, GENETIC


@dataclass(frozen=True)
class GenSpec:
    N: int
    n: int
    effects: tuple = ()              # ((combo, penetrance array of len 3^r), ...)
    baseline: float = 0.1
    noise: float = 0.0
    allele_freqs: np.ndarray | None = None   # (n, 3); uniform when omitted
    combine: str = "max"             # max | add | mul
    seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise ValueError("need N >= 1 and n >= 1")
        if not 0 <= self.baseline <= 1 or not 0 <= self.noise <= 1:
            raise ValueError("baseline and noise must be probabilities")
        for combo, pen in self.effects:
            pen = np.asarray(pen, dtype=float)
            if pen.shape != (3 ** len(combo),):
                raise ValueError(f"penetrance for combo {combo} must cover all "
                                 f"{3 ** len(combo)} cells")
            if ((pen < 0) | (pen > 1)).any():
                raise ValueError("penetrance values must lie in [0,1]")


def xor_pair_effect(col_a: int, col_b: int, hi: float = 0.9, lo: float = 0.1):
    """Mod-3 parity interaction: hi on cells with (x_a+x_b)%3==0, lo elsewhere.

    With uniform marginals each factor alone is marginally uninformative
    while the pair separates strongly.
    """
    pen = np.full(9, lo)
    for a in range(3):
        for b in range(3):
            if (a + b) % 3 == 0:
                pen[3 * a + b] = hi
    return ((col_a, col_b), pen)


def disease_probability(spec: GenSpec, X: np.ndarray) -> np.ndarray:
    """The per-row disease probability implied by baseline + planted effects."""
    p = np.full(X.shape[0], float(spec.baseline))
    for combo, pen in spec.effects:
        pen = np.asarray(pen, dtype=float)
        cells = X[:, list(combo)].astype(np.int64) @ \
            (3 ** np.arange(len(combo) - 1, -1, -1))
        q = pen[cells]
        if spec.combine == "max":
            p = np.maximum(p, q)
        elif spec.combine == "add":
            p = np.clip(p + q, 0.0, 1.0)
        elif spec.combine == "mul":
            p = p * q
        else:
            raise ValueError(f"unknown combine mode {spec.combine!r}")
    return p


def bayes_balanced_error(spec: GenSpec) -> float:
    """Analytic balanced error of the optimal rule for this generating law.

    Enumerates the cell distribution of the planted-effect columns (all
    other columns are independent of Y), applies the strict-threshold
    optimal rule, and folds in label noise.
    """
    cols = sorted({c for combo, _ in spec.effects for c in combo})
    if not cols:
        return 0.5
    freqs = _freqs(spec)
    r = len(cols)
    grid = np.array(np.unravel_index(np.arange(3 ** r), (3,) * r)).T
    # joint probability of each cell of the relevant columns
    cellp = np.ones(len(grid))
    for j, c in enumerate(cols):
        cellp *= freqs[c][grid[:, j]]
    full = np.zeros((len(grid), spec.n), dtype=np.int64)
    full[:, cols] = grid
    # disease probability per cell (depends only on the effect columns)
    pdis = disease_probability(spec, full)
    pdis = pdis * (1 - spec.noise) + (1 - pdis) * spec.noise
    prev = float((cellp * pdis).sum())
    predict_hi = pdis > prev
    p_ctrl = cellp * (1 - pdis)
    p_case = cellp * pdis
    fp = p_ctrl[predict_hi].sum() / p_ctrl.sum()
    fn = p_case[~predict_hi].sum() / p_case.sum()
    return float(0.5 * fp + 0.5 * fn)


def _freqs(spec: GenSpec) -> np.ndarray:
    if spec.allele_freqs is None:
        return np.full((spec.n, 3), 1.0 / 3.0)
    freqs = np.asarray(spec.allele_freqs, dtype=float)
    if freqs.shape != (spec.n, 3) or not np.allclose(freqs.sum(axis=1), 1.0):
        raise ValueError("allele_freqs must be (n, 3) rows summing to 1")
    return freqs


def generate(spec: GenSpec, kinds=None) -> Dataset:
    """Draw a Dataset from the spec; retried once if a class comes up empty."""
    master = np.random.SeedSequence(spec.seed)
    for child in master.spawn(2):
        rng = np.random.default_rng(child)
        freqs = _freqs(spec)
        X = np.empty((spec.N, spec.n), dtype=np.int8)
        for j in range(spec.n):
            X[:, j] = rng.choice(3, size=spec.N, p=freqs[j])
        p = disease_probability(spec, X)
        y = np.where(rng.random(spec.N) < p, 1, -1).astype(np.int8)
        if spec.noise > 0:
            flip = rng.random(spec.N) < spec.noise
            y[flip] = -y[flip]
        if (y == 1).any() and (y == -1).any():
            return Dataset(predictors=X, phenotype=y,
                           predictor_kind=tuple(kinds) if kinds else ())
    raise ValueError("generated sample has a single class twice; adjust the spec")
