"""Logic regression over ternary expression trees with simulated annealing.

An expression tree is a binary tree whose knots hold mod-3 sum or product
and whose leaves hold predictor indices; a forest of s such trees enters a
linear predictor h(x) = beta_0 + sum beta_v T_v(x).  beta is fit by
minimizing the normalized smoothed score L (a class-weighted log2-logistic
loss), and the forest structure is searched by a Metropolis chain over the
six neighbor moves, returning the best forest ever visited.

Trees are nested tuples: a leaf is ("x", i); a knot is (op, left, right)
with op "+" or "*" (both mod 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, EXTERNAL, FoldPlan
from .metrics import CvError, DegenerateClassError, cv_error, penalty

SUM = "+"
PROD = "*"
LEAF = "x"

LN2 = math.log(2.0)

# structural model tags
UNCONSTRAINED = "none"
MODEL1 = "model1"   # external factors only as fixed single-leaf trees
MODEL2 = "model2"   # external leaf: product parent, sibling a genetic leaf
MODEL3 = "model3"   # external variables only
MODEL4 = "model4"   # genetic variables only

MOVE_NAMES = ("variable-change", "operator-change", "delete-leaf",
              "split-leaf", "prune-branch", "grow-branch")


def leaf(i):
    return (LEAF, int(i))


def is_leaf(t):
    return t[0] == LEAF


def complexity(t) -> int:
    """Number of leaves."""
    if is_leaf(t):
        return 1
    return complexity(t[1]) + complexity(t[2])


def tree_vars(t) -> set:
    if is_leaf(t):
        return {t[1]}
    return tree_vars(t[1]) | tree_vars(t[2])


def eval_tree(t, X) -> np.ndarray:
    """Evaluate bottom-up with sums and products reduced mod 3."""
    X = np.atleast_2d(X)
    if is_leaf(t):
        return X[:, t[1]].astype(np.int64)
    a = eval_tree(t[1], X)
    b = eval_tree(t[2], X)
    return (a + b) % 3 if t[0] == SUM else (a * b) % 3


def tree_to_text(t, names=None) -> str:
    """Human-readable expression, e.g. ((x1*x2)*(x3+x4))."""
    if is_leaf(t):
        return names[t[1]] if names else f"x{t[1] + 1}"
    return f"({tree_to_text(t[1], names)}{t[0]}{tree_to_text(t[2], names)})"


def canonical(t):
    """Order-normalized form (both operations are commutative)."""
    if is_leaf(t):
        return t
    a, b = canonical(t[1]), canonical(t[2])
    if repr(b) < repr(a):
        a, b = b, a
    return (t[0], a, b)


@dataclass(frozen=True)
class Forest:
    """Fixed-size tuple of expression trees plus a structural-model tag."""

    trees: tuple
    constraint: str = UNCONSTRAINED

    @property
    def s(self) -> int:
        return len(self.trees)

    def complexity(self) -> int:
        return max(complexity(t) for t in self.trees)

    def key(self):
        return tuple(canonical(t) for t in self.trees)


@dataclass(frozen=True)
class FittedForest:
    forest: Forest
    beta: np.ndarray          # (s+1,) intercept first
    score: float              # attained L on the training subsample
    converged: bool
    cv: CvError | None = None

    def h(self, X) -> np.ndarray:
        return _design(self.forest, X) @ self.beta

    def predict(self, X) -> np.ndarray:
        return np.where(self.h(X) > 0, 1, -1).astype(np.int8)

    def to_text(self, names=None) -> str:
        parts = [f"{self.beta[0]:+.4g}"]
        for b, t in zip(self.beta[1:], self.forest.trees):
            parts.append(f"{b:+.4g}*{tree_to_text(t, names)}")
        return " ".join(parts)


def _design(forest: Forest, X) -> np.ndarray:
    X = np.atleast_2d(X)
    Z = np.empty((X.shape[0], forest.s + 1))
    Z[:, 0] = 1.0
    for v, t in enumerate(forest.trees):
        Z[:, v + 1] = eval_tree(t, X)
    return Z


# ---------------------------------------------------------------------------
# score function and beta optimization

def _weights(ds: Dataset, idx) -> np.ndarray:
    psi_pos = penalty(ds, idx, 1)
    psi_neg = penalty(ds, idx, -1)
    y = ds.phenotype[np.asarray(idx)]
    return np.where(y == 1, psi_pos, psi_neg)


def score_L(forest: Forest, beta, ds: Dataset, idx) -> float:
    """Normalized smoothed score: mean of log2(1+e^{-y h(x)}) * psi(y)."""
    idx = np.asarray(idx)
    psi = _weights(ds, idx)
    y = ds.phenotype[idx].astype(float)
    h = _design(forest, ds.predictors[idx]) @ np.asarray(beta, dtype=float)
    return float(np.mean(np.log2(1.0 + np.exp(-y * h)) * psi))


def _loss_grad_hess(Z, y, psi, beta):
    """L, gradient and Hessian in beta; phi(t)=log2(1+e^t) so phi'(t)=sigma(t)/ln2."""
    t = -y * (Z @ beta)
    # stable log(1+e^t) and sigmoid
    loss = np.mean((np.logaddexp(0.0, t) / LN2) * psi)
    sig = 1.0 / (1.0 + np.exp(-t))
    coef = psi * sig / LN2 * (-y) / len(y)
    grad = Z.T @ coef
    w = psi * sig * (1.0 - sig) / LN2 / len(y)
    hess = (Z * w[:, None]).T @ Z
    return loss, grad, hess


def fit_beta(forest: Forest, ds: Dataset, idx, tol: float = 1e-8,
             max_iter: int = 200, step_cap: float = 10.0) -> FittedForest:
    """Minimize L over beta by safeguarded Newton with step halving.

    The loss is convex, so the gradient-norm stop is global; separable data
    push ||beta|| up until the per-step cap engages and max_iter triggers,
    which is reported via ``converged``.
    """
    idx = np.asarray(idx)
    Z = _design(forest, ds.predictors[idx])
    if Z.shape[1] > Z.shape[0]:
        raise ValueError("more coefficients than training rows")
    y = ds.phenotype[idx].astype(float)
    psi = _weights(ds, idx)
    beta = np.zeros(forest.s + 1)
    loss, grad, hess = _loss_grad_hess(Z, y, psi, beta)
    converged = False
    for _ in range(max_iter):
        if np.linalg.norm(grad) <= tol:
            converged = True
            break
        # ridge safeguard keeps the step defined for degenerate features
        try:
            step = np.linalg.solve(hess + 1e-10 * np.eye(len(beta)), grad)
        except np.linalg.LinAlgError:
            step = grad
        nrm = np.linalg.norm(step)
        if nrm > step_cap:
            step *= step_cap / nrm
        # halve until the loss does not increase
        scale = 1.0
        for _ in range(30):
            new_beta = beta - scale * step
            new_loss, new_grad, new_hess = _loss_grad_hess(Z, y, psi, new_beta)
            if new_loss <= loss + 1e-15:
                break
            scale *= 0.5
        else:
            converged = True  # no descent direction left: at numerical optimum
            break
        beta, loss, grad, hess = new_beta, new_loss, new_grad, new_hess
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss during beta optimization")
    return FittedForest(forest=forest, beta=beta, score=loss, converged=converged)


def lr_trainer(forest: Forest):
    """Trainer closure for the CV harness: refit beta on each subsample."""

    def train(ds, idx, seed):
        return fit_beta(forest, ds, idx).predict

    return train


def lr_predict(fit: FittedForest, x):
    """Sign rule: +1 where h(x)>0, else -1 (ties low-risk)."""
    return fit.predict(np.atleast_2d(x))


# ---------------------------------------------------------------------------
# structural model constraints

def tree_ok(t, constraint: str, kinds) -> bool:
    """Does one tree satisfy the structural model?"""
    ext = {i for i, k in enumerate(kinds) if k == EXTERNAL}
    if constraint == UNCONSTRAINED:
        return True
    if constraint == MODEL1:
        # external variables may only form single-leaf trees
        return is_leaf(t) or not (tree_vars(t) & ext)
    if constraint == MODEL3:
        return tree_vars(t) <= ext
    if constraint == MODEL4:
        return not (tree_vars(t) & ext)
    if constraint == MODEL2:
        return _model2_ok(t, ext, at_root=True)
    raise ValueError(f"unknown constraint tag {constraint!r}")


def _model2_ok(t, ext, at_root) -> bool:
    """Every external leaf must hang under a product knot whose sibling is a
    single genetic leaf."""
    if is_leaf(t):
        # a bare external leaf has no parent knot to satisfy the rule
        return t[1] not in ext
    op, a, b = t
    for child, sib in ((a, b), (b, a)):
        if is_leaf(child) and child[1] in ext:
            if op != PROD or not is_leaf(sib) or sib[1] in ext:
                return False
        elif not is_leaf(child):
            if not _model2_ok(child, ext, at_root=False):
                return False
    return True


def forest_ok(F: Forest, kinds, r_max: int) -> bool:
    return all(complexity(t) <= r_max and tree_ok(t, F.constraint, kinds)
               for t in F.trees)


def allowed_vars(constraint: str, kinds) -> list:
    """Variables a multi-leaf tree may draw from under the constraint."""
    if constraint == MODEL3:
        return [i for i, k in enumerate(kinds) if k == EXTERNAL]
    if constraint in (MODEL1, MODEL4):
        return [i for i, k in enumerate(kinds) if k != EXTERNAL]
    return list(range(len(kinds)))


# ---------------------------------------------------------------------------
# neighbor moves

def _subtree_paths(t, path=()):
    """All positions in the tree, root included; a path is a tuple of 1/2."""
    yield path, t
    if not is_leaf(t):
        yield from _subtree_paths(t[1], path + (1,))
        yield from _subtree_paths(t[2], path + (2,))


def _replace(t, path, new):
    if not path:
        return new
    op, a, b = t
    if path[0] == 1:
        return (op, _replace(a, path[1:], new), b)
    return (op, a, _replace(b, path[1:], new))


def tree_moves(t, n_vars: int, r_max: int, constraint: str, kinds) -> list:
    """All legal (move-name, new-tree) pairs reachable from t in one move."""
    moves = []
    C = complexity(t)
    for path, sub in _subtree_paths(t):
        if is_leaf(sub):
            v = sub[1]
            # 1. variable change
            for u in range(n_vars):
                if u != v:
                    moves.append(("variable-change", _replace(t, path, leaf(u))))
            # 4. splitting a leaf: one child keeps the variable
            if C + 1 <= r_max:
                for u in range(n_vars):
                    for op in (SUM, PROD):
                        moves.append(("split-leaf", _replace(t, path, (op, leaf(v), leaf(u)))))
        else:
            op, a, b = sub
            # 2. operator change
            other = PROD if op == SUM else SUM
            moves.append(("operator-change", _replace(t, path, (other, a, b))))
            if is_leaf(a) and is_leaf(b):
                # 3. deleting a leaf: two-leaf branch collapses to one leaf
                moves.append(("delete-leaf", _replace(t, path, a)))
                moves.append(("delete-leaf", _replace(t, path, b)))
            else:
                # 5. branch pruning (two-leaf branches are move 3's job)
                moves.append(("prune-branch", _replace(t, path, a)))
                moves.append(("prune-branch", _replace(t, path, b)))
        # 6. branch growing x_j * B, for non-leaf branches (leaves are move 4's job)
        if not is_leaf(sub) and C + 1 <= r_max:
            for u in range(n_vars):
                for op in (SUM, PROD):
                    moves.append(("grow-branch", _replace(t, path, (op, leaf(u), sub))))
    return [(name, nt) for name, nt in moves
            if complexity(nt) <= r_max and tree_ok(nt, constraint, kinds)]


def neighbors(F: Forest, r_max: int, kinds, rng,
              movable=None) -> Forest:
    """Propose a uniformly chosen legal move on a uniformly chosen tree.

    ``movable`` optionally restricts which tree slots may change (used for
    the fixed external-leaf trees of Model 1).
    """
    n_vars = len(kinds)
    slots = list(movable) if movable is not None else list(range(F.s))
    rng.shuffle(slots)
    for slot in slots:
        # model 1's movable trees are the genetic-only polynomials; the
        # external single-leaf trees sit in the fixed tail slots
        cstr = MODEL4 if F.constraint == MODEL1 else F.constraint
        opts = tree_moves(F.trees[slot], n_vars, r_max, cstr, kinds)
        if opts:
            _, new_tree = opts[rng.integers(len(opts))]
            trees = list(F.trees)
            trees[slot] = new_tree
            return Forest(trees=tuple(trees), constraint=F.constraint)
    raise RuntimeError("no legal move exists from this forest")


def classify_move(t, t_new) -> str | None:
    """Which single move turns t into t_new?  None if they aren't neighbors.

    Overlapping cases resolve by the most specific label: a two-leaf-branch
    collapse is ``delete-leaf`` (not pruning) and a leaf expansion keeping
    its variable is ``split-leaf`` (not growing).
    """
    c, cn = complexity(t), complexity(t_new)
    if t == t_new:
        return None
    if c == cn:
        diffs = _diff_positions(t, t_new)
        if len(diffs) != 1:
            return None
        a, b = diffs[0]
        if is_leaf(a) and is_leaf(b):
            return "variable-change"
        if not is_leaf(a) and not is_leaf(b) and a[1] == b[1] and a[2] == b[2]:
            return "operator-change"
        return None
    if cn < c:
        # some branch of t was replaced by one of its children; pruning may
        # discard a multi-leaf branch, so the size can drop by more than one
        for path, sub in _subtree_paths(t):
            if is_leaf(sub):
                continue
            for child in (sub[1], sub[2]):
                if _replace(t, path, child) == t_new:
                    if is_leaf(sub[1]) and is_leaf(sub[2]):
                        return "delete-leaf"
                    return "prune-branch"
        return None
    if cn == c + 1:
        labels = set()
        for path, sub in _subtree_paths(t_new):
            if is_leaf(sub):
                continue
            op, a, b = sub
            # splitting keeps the old variable in the first child; growing
            # places the new leaf first — mirror those conventions here
            for kept, added, kept_first in ((a, b, True), (b, a, False)):
                if _replace(t_new, path, kept) != t:
                    continue
                if is_leaf(kept) and is_leaf(added):
                    orig = _subtree_at(t, path)
                    if (kept_first and orig is not None and is_leaf(orig)
                            and orig[1] == kept[1]):
                        labels.add("split-leaf")
                elif is_leaf(added) and not kept_first:
                    labels.add("grow-branch")
        if "split-leaf" in labels:
            return "split-leaf"
        if "grow-branch" in labels:
            return "grow-branch"
        return None
    return None


def _subtree_at(t, path):
    for step in path:
        if is_leaf(t):
            return None
        t = t[step]
    return t


def _diff_positions(t, t_new, acc=None):
    """Minimal differing subtree pairs between equal-shape trees."""
    if acc is None:
        acc = []
    if t == t_new:
        return acc
    if is_leaf(t) or is_leaf(t_new):
        acc.append((t, t_new))
        return acc
    if t[0] != t_new[0]:
        acc.append((t, t_new))
        return acc
    _diff_positions(t[1], t_new[1], acc)
    _diff_positions(t[2], t_new[2], acc)
    return acc


# ---------------------------------------------------------------------------
# simulated annealing

@dataclass(frozen=True)
class CoolingSchedule:
    """Geometric cooling: T_k = T0 * gamma^k over ``steps`` proposals."""

    T0: float
    gamma: float
    steps: int

    def __post_init__(self):
        if self.T0 <= 0 or not 0 < self.gamma <= 1 or self.steps < 1:
            raise ValueError("need T0>0, 0<gamma<=1, steps>=1")

    def temperature(self, k: int) -> float:
        return self.T0 * self.gamma ** k


def geometric_schedule(T0: float, steps: int, T_final_ratio: float = 1e-3) -> CoolingSchedule:
    gamma = T_final_ratio ** (1.0 / max(steps - 1, 1))
    return CoolingSchedule(T0=T0, gamma=gamma, steps=steps)


def random_tree(rng, n_vars, r_max, constraint, kinds, max_tries=200):
    """A random legal tree: a leaf grown by a few random split moves."""
    for _ in range(max_tries):
        pool = allowed_vars(constraint, kinds) or list(range(n_vars))
        t = leaf(pool[rng.integers(len(pool))])
        target = int(rng.integers(1, r_max + 1))
        while complexity(t) < target:
            opts = [m for m in tree_moves(t, n_vars, r_max, constraint, kinds)
                    if complexity(m[1]) > complexity(t)]
            if not opts:
                break
            t = opts[rng.integers(len(opts))][1]
        if tree_ok(t, constraint, kinds):
            return t
    raise RuntimeError("could not draw a legal random tree")


def initial_forest(rng, s, n_vars, r_max, constraint, kinds) -> Forest:
    tree_cstr = MODEL4 if constraint == MODEL1 else constraint
    trees = tuple(random_tree(rng, n_vars, r_max, tree_cstr, kinds)
                  for _ in range(s))
    if constraint == MODEL1:
        ext = [i for i, k in enumerate(kinds) if k == EXTERNAL]
        trees = trees + tuple(leaf(i) for i in ext)
    return Forest(trees=trees, constraint=constraint)


def forest_cv_error(F: Forest, ds: Dataset, plan: FoldPlan,
                    beta_mode: str = "per-fold") -> float:
    """Normalized prediction error of a forest under K-fold CV.

    ``per-fold`` refits beta on every training complement (the full CV
    semantics); ``full-sample`` fits beta once on all rows, an approximation
    for long chains.
    """
    if beta_mode == "full-sample":
        fit = fit_beta(F, ds, ds.full_index())

        def train(d, idx, seed):
            return fit.predict
    else:
        train = lr_trainer(F)
    return cv_error(train, ds, plan).value


@dataclass
class AnnealTrace:
    errors: list = field(default_factory=list)       # phi of current state per step
    accepted: int = 0
    proposed: int = 0
    best_step: int = -1
    cache_hits: int = 0


def anneal(ds: Dataset, plan: FoldPlan, s: int = 3, r_max: int = 8,
           constraint: str = UNCONSTRAINED, schedule: CoolingSchedule | None = None,
           seed=0, beta_mode: str = "per-fold", init: Forest | None = None):
    """Metropolis search over the forest neighbor graph; best-visited output.

    Returns (FittedForest refit on the full sample, AnnealTrace).  The
    objective is the forest's K-fold balanced error; evaluations are
    memoized by canonical forest key, so revisits are free.
    """
    rng = np.random.default_rng(seed)
    kinds = ds.predictor_kind
    n_vars = ds.n
    F = init if init is not None else initial_forest(rng, s, n_vars, r_max,
                                                    constraint, kinds)
    if not forest_ok(F, kinds, r_max):
        raise ValueError("initial forest violates the structural constraints")
    movable = list(range(s)) if constraint == MODEL1 else None

    cache: dict = {}
    trace = AnnealTrace()

    def phi(forest):
        key = forest.key()
        if key in cache:
            trace.cache_hits += 1
            return cache[key]
        val = forest_cv_error(forest, ds, plan, beta_mode)
        cache[key] = val
        return val

    if schedule is None:
        # spread of the objective over a handful of random forests sets T0
        probes = [phi(initial_forest(rng, s, n_vars, r_max, constraint, kinds))
                  for _ in range(20)]
        spread = max(probes) - min(probes)
        schedule = geometric_schedule(T0=max(spread, 1e-3), steps=5000)

    cur_err = phi(F)
    best_F, best_err = F, cur_err
    trace.best_step = 0
    for k in range(schedule.steps):
        Fp = neighbors(F, r_max, kinds, rng, movable=movable)
        trace.proposed += 1
        new_err = phi(Fp)
        accept = new_err <= cur_err
        if not accept:
            T = schedule.temperature(k)
            accept = T > 0 and rng.random() < math.exp(-(new_err - cur_err) / T)
        if accept:
            F, cur_err = Fp, new_err
            trace.accepted += 1
            if cur_err < best_err:
                best_F, best_err = F, cur_err
                trace.best_step = k + 1
        trace.errors.append(cur_err)

    fit = fit_beta(best_F, ds, ds.full_index())
    fit = FittedForest(forest=fit.forest, beta=fit.beta, score=fit.score,
                       converged=fit.converged,
                       cv=CvError(value=best_err, per_fold=(), K=plan.K))
    return fit, trace


def enumerate_forests(n_vars: int, s: int, r_max: int,
                      constraint: str = UNCONSTRAINED, kinds=None):
    """All distinct forests (canonical keys) on tiny spaces, for oracles."""
    kinds = kinds if kinds is not None else ("genetic",) * n_vars
    trees = set()
    frontier = [leaf(i) for i in range(n_vars)
                if tree_ok(leaf(i), constraint, kinds)]
    for t in frontier:
        trees.add(canonical(t))
    while frontier:
        t = frontier.pop()
        for _, nt in tree_moves(t, n_vars, r_max, constraint, kinds):
            c = canonical(nt)
            if c not in trees:
                trees.add(c)
                frontier.append(nt)
    from itertools import combinations_with_replacement
    out = []
    for combo in combinations_with_replacement(sorted(trees, key=repr), s):
        out.append(Forest(trees=tuple(combo), constraint=constraint))
    return out
