"""Batch command-line front end.

One YAML config file drives every run; flags exist only for path, seed and
worker overrides, and the report embeds the config verbatim so it is
self-describing.  Subcommands: ``run``, ``validate``, ``synth``,
``report``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from itertools import product

import numpy as np
import yaml

from . import __version__
from .cart import cart_trainer, grow_tree, tree_to_text
from .data import (Dataset, balance_resample, load_dataset, make_folds,
                   save_dataset, shuffle_then_fold)
from .ensemble import cvim, default_rf_size, rf_trainer, sgb_trainer
from .logicreg import anneal, geometric_schedule, lr_trainer
from .mdr import CLASSIC, INDEPENDENT, mdr_search, mdr_trainer
from .metrics import cv_error
from .permtest import permutation_test
from .synth import GenSpec, generate

METHODS = ("mdr", "mdrir", "logicreg", "cart", "rf", "sgb", "cvim",
           "permtest", "synth")

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "method", "seed", "config"],
    "properties": {
        "version": {"type": "string"},
        "method": {"type": "string", "enum": list(METHODS)},
        "seed": {"type": "integer"},
        "config": {"type": "object"},
        "cv_error": {
            "type": "object",
            "required": ["value", "K", "per_fold"],
            "properties": {
                "value": {"type": "number", "minimum": 0, "maximum": 1},
                "K": {"type": "integer", "minimum": 1},
                "per_fold": {"type": "array"},
            },
        },
        "permutation": {
            "type": "object",
            "required": ["p_value", "B", "accuracy_bound", "reject"],
        },
        "wall_clock_seconds": {"type": "number"},
    },
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return cfg


def validate_config(cfg: dict) -> list:
    """Return a list of problems (empty when the config is usable)."""
    problems = []
    method = cfg.get("method")
    if not isinstance(method, dict) or "name" not in method:
        problems.append("config needs a 'method' block with a 'name'")
        return problems
    if method["name"] not in METHODS:
        problems.append(f"unknown method {method['name']!r}; choose from {METHODS}")
    if method["name"] != "synth" and "dataset" not in cfg:
        problems.append("config needs a 'dataset' block (path, phenotype)")
    folds = cfg.get("folds", 6)
    if not isinstance(folds, int) or folds < 1:
        problems.append("'folds' must be a positive integer")
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        problems.append("'seed' must be an integer")
    return problems


def _load(cfg: dict) -> Dataset:
    d = cfg["dataset"]
    return load_dataset(
        d["path"],
        phenotype_column=d.get("phenotype", "Y"),
        external_columns=d.get("external", ()),
        phenotype_coding=str(d.get("phenotype_coding", "pm1")),
        separator=d.get("separator", ","),
    )


def _plan(ds: Dataset, cfg: dict, seed: int):
    K = int(cfg.get("folds", 6))
    if cfg.get("shuffle", True):
        return shuffle_then_fold(ds, K, seed)
    return make_folds(ds.N, K)


def _cv_payload(cv) -> dict:
    return {"value": cv.value, "K": cv.K,
            "per_fold": [list(p) for p in cv.per_fold]}


def _perm_payload(res) -> dict:
    return {"observed_error": res.observed_error, "p_value": res.p_value,
            "B": res.B, "alpha": res.alpha, "reject": bool(res.reject),
            "accuracy_bound": res.accuracy_bound,
            "null_errors": [float(v) for v in res.null_errors]}


def _maybe_permtest(report, trainer, ds, plan, cfg, seed, workers, observed):
    p = cfg.get("permutation")
    if p:
        res = permutation_test(trainer, ds, plan, B=int(p.get("B", 100)),
                               alpha=float(p.get("alpha", 0.05)), seed=seed,
                               workers=workers, observed=observed)
        report["permutation"] = _perm_payload(res)


def _balanced_cv(trainer, ds, cfg, seed, make_plan):
    """CV error, optionally averaged over class-balancing resamples."""
    bal = cfg.get("balance") or {}
    if not bal.get("enabled", False):
        plan = make_plan(ds)
        return cv_error(trainer, ds, plan, seed), ds, plan
    repeats = int(bal.get("repeats", 1))
    values = []
    last = None
    for i in range(repeats):
        bds = balance_resample(ds, seed=(seed, i))
        plan = make_plan(bds)
        last = (bds, plan)
        values.append(cv_error(trainer, bds, plan, seed))
    mean = float(np.mean([v.value for v in values]))
    cv = values[-1]
    cv = type(cv)(value=mean, per_fold=cv.per_fold, K=cv.K)
    return cv, last[0], last[1]


def run(cfg: dict, workers: int | None = None) -> dict:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    seed = int(cfg.get("seed", 0))
    workers = workers if workers is not None else int(cfg.get("workers", 1))
    name = cfg["method"]["name"]
    t0 = time.perf_counter()
    report = {"version": __version__, "method": name, "seed": seed,
              "config": cfg, "workers": workers}

    if name == "synth":
        report.update(_run_synth(cfg))
    else:
        ds = _load(cfg)
        make_plan = lambda d: _plan(d, cfg, seed)
        handler = {
            "mdr": _run_mdr, "mdrir": _run_mdr, "logicreg": _run_logicreg,
            "cart": _run_cart, "rf": _run_rf, "sgb": _run_sgb,
            "cvim": _run_cvim, "permtest": _run_permtest,
        }[name]
        report.update(handler(cfg, ds, make_plan, seed, workers))

    report["wall_clock_seconds"] = time.perf_counter() - t0
    out = cfg.get("output")
    if out:
        with open(out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def _run_synth(cfg: dict) -> dict:
    m = cfg["method"]
    effects = tuple((tuple(e["combo"]), np.asarray(e["penetrance"], dtype=float))
                    for e in m.get("effects", ()))
    spec = GenSpec(N=int(m["N"]), n=int(m["n"]), effects=effects,
                   baseline=float(m.get("baseline", 0.1)),
                   noise=float(m.get("noise", 0.0)),
                   combine=m.get("combine", "max"),
                   seed=int(m.get("seed", cfg.get("seed", 0))))
    ds = generate(spec, kinds=m.get("kinds"))
    path = m.get("path") or cfg.get("output_dataset") or "synth.csv"
    save_dataset(ds, path)
    return {"dataset_path": str(path), "N": ds.N, "n": ds.n,
            "cases": int((ds.phenotype == 1).sum()),
            "controls": int((ds.phenotype == -1).sum())}


def _resolve_restrict(m: dict, ds: Dataset):
    restrict = m.get("restrict")
    if restrict is None:
        return None
    if restrict == "genetic":
        return [int(i) for i in ds.genetic_columns()]
    if restrict == "external":
        return [int(i) for i in ds.external_columns()]
    return [ds.predictor_names.index(c) if isinstance(c, str) else int(c)
            for c in restrict]


def _run_mdr(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    variant = CLASSIC if m["name"] == "mdr" else INDEPENDENT
    plan = make_plan(ds)
    rep = mdr_search(ds, plan, r_min=int(m.get("r_min", 1)),
                     r_max=int(m.get("r_max", 4)), variant=variant,
                     restrict=_resolve_restrict(m, ds), seed=seed,
                     workers=workers)
    top = int(m.get("top", 10))
    best_combo, best_cv = rep.best
    out = {
        "cv_error": _cv_payload(best_cv),
        "ranked_combos": [
            {"columns": [ds.predictor_names[i] for i in combo],
             "cv_error": cv.value}
            for combo, cv in rep.ranked[:top]],
        "n_combos_searched": rep.n_combos,
    }
    _maybe_permtest(out, mdr_trainer(best_combo, variant), ds, plan, cfg,
                    seed, workers, best_cv)
    return out


def _run_logicreg(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    plan = make_plan(ds)
    schedule = None
    if "steps" in m or "T0" in m:
        schedule = geometric_schedule(T0=float(m.get("T0", 0.1)),
                                      steps=int(m.get("steps", 5000)))
    fit, trace = anneal(ds, plan, s=int(m.get("s", 3)),
                        r_max=int(m.get("r_max", 8)),
                        constraint=m.get("model", "none"), schedule=schedule,
                        seed=seed, beta_mode=m.get("beta_mode", "per-fold"))
    out = {
        "cv_error": _cv_payload(fit.cv),
        "expression": fit.to_text(ds.predictor_names),
        "beta": [float(b) for b in fit.beta],
        "trees": [_tree_text(t, ds.predictor_names) for t in fit.forest.trees],
        "anneal": {"accepted": trace.accepted, "proposed": trace.proposed,
                   "best_step": trace.best_step, "cache_hits": trace.cache_hits},
    }
    _maybe_permtest(out, lr_trainer(fit.forest), ds, plan, cfg, seed,
                    workers, fit.cv)
    return out


def _tree_text(t, names):
    from .logicreg import tree_to_text as ttt
    return ttt(t, names)


def _run_cart(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    trainer = cart_trainer(D_max=int(m.get("D_max", 16)),
                           min_node=int(m.get("min_node", 5)))
    cv, dsb, plan = _balanced_cv(trainer, ds, cfg, seed, make_plan)
    tree = grow_tree(dsb, dsb.full_index(), D_max=int(m.get("D_max", 16)),
                     min_node=int(m.get("min_node", 5)))
    out = {"cv_error": _cv_payload(cv),
           "tree": tree_to_text(tree, dsb.predictor_names),
           "n_leaves": tree.n_leaves}
    _maybe_permtest(out, trainer, dsb, plan, cfg, seed, workers, cv)
    return out


def _run_rf(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    B = m.get("B")
    trainer = rf_trainer(B=int(B) if B else None,
                         D_max=int(m.get("D_max", 16)),
                         min_node=int(m.get("min_node", 5)), workers=workers)
    cv, dsb, plan = _balanced_cv(trainer, ds, cfg, seed, make_plan)
    out = {"cv_error": _cv_payload(cv),
           "B": int(B) if B else default_rf_size(dsb.N)}
    _maybe_permtest(out, trainer, dsb, plan, cfg, seed, workers, cv)
    return out


def _run_sgb(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    grid_keys = ("D", "M", "rho", "eta")
    grids = {k: m.get(k, d) for k, d in zip(grid_keys, (4, 500, 0.1, 0.5))}
    lists = {k: v if isinstance(v, (list, tuple)) else [v]
             for k, v in grids.items()}
    results = []
    plan_holder = {}
    for D, M, rho, eta in product(*(lists[k] for k in grid_keys)):
        trainer = sgb_trainer(D=int(D), M=int(M), rho=float(rho),
                              eta=float(eta),
                              min_node=int(m.get("min_node", 5)),
                              weights_on=m.get("weights_on", "full"))
        cv, dsb, plan = _balanced_cv(trainer, ds, cfg, seed, make_plan)
        plan_holder["last"] = (trainer, dsb, plan)
        results.append({"D": int(D), "M": int(M), "rho": float(rho),
                        "eta": float(eta), "cv_error": cv.value,
                        "_cv": cv})
    best = min(results, key=lambda r: r["cv_error"])
    out = {"cv_error": _cv_payload(best.pop("_cv")),
           "best_params": {k: best[k] for k in grid_keys},
           "grid": [{k: r[k] for k in (*grid_keys, "cv_error")}
                    for r in results]}
    for r in results:
        r.pop("_cv", None)
    trainer = sgb_trainer(D=best["D"], M=best["M"], rho=best["rho"],
                          eta=best["eta"], min_node=int(m.get("min_node", 5)),
                          weights_on=m.get("weights_on", "full"))
    _, dsb, plan = plan_holder["last"][0], plan_holder["last"][1], plan_holder["last"][2]
    _maybe_permtest(out, trainer, dsb, plan, cfg, seed, workers, None)
    return out


def _run_cvim(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    rep = cvim(ds, B=int(m.get("B", 100)),
               cond_level=float(m.get("cond_level", 0.05)), seed=seed,
               D_max=int(m.get("D_max", 16)),
               min_node=int(m.get("min_node", 5)), workers=workers)
    order = rep.ranking()
    return {"importance": [
        {"predictor": ds.predictor_names[i],
         "cvim": float(rep.values[i]),
         "conditioning": [ds.predictor_names[j] for j in rep.conditioning[i]],
         "replicates_used": int(rep.effective_B[i])}
        for i in order],
        "B": rep.B}


def _run_permtest(cfg, ds, make_plan, seed, workers) -> dict:
    m = cfg["method"]
    inner = m.get("model", {"name": "cart"})
    trainer = _trainer_for(inner, ds)
    plan = make_plan(ds)
    observed = cv_error(trainer, ds, plan, seed)
    res = permutation_test(trainer, ds, plan, B=int(m.get("B", 100)),
                           alpha=float(m.get("alpha", 0.05)), seed=seed,
                           workers=workers, observed=observed)
    return {"cv_error": _cv_payload(observed), "permutation": _perm_payload(res)}


def _trainer_for(inner: dict, ds: Dataset):
    name = inner.get("name", "cart")
    if name in ("mdr", "mdrir"):
        combo = tuple(ds.predictor_names.index(c) if isinstance(c, str) else int(c)
                      for c in inner["combo"])
        return mdr_trainer(combo, CLASSIC if name == "mdr" else INDEPENDENT)
    if name == "cart":
        return cart_trainer(D_max=int(inner.get("D_max", 16)),
                            min_node=int(inner.get("min_node", 5)))
    if name == "rf":
        return rf_trainer(B=inner.get("B"), D_max=int(inner.get("D_max", 16)),
                          min_node=int(inner.get("min_node", 5)))
    if name == "sgb":
        return sgb_trainer(D=int(inner.get("D", 4)), M=int(inner.get("M", 500)),
                           rho=float(inner.get("rho", 0.1)),
                           eta=float(inner.get("eta", 0.5)))
    raise ConfigError(f"permtest cannot wrap method {name!r}")


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="snpkit",
                                     description="Case-control genotype analysis toolkit")
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get("SNPKIT_WORKERS", 0)) or None,
                        help="worker cap (overrides SNPKIT_WORKERS and config)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, hlp in (("run", "execute a config and write its report"),
                     ("validate", "check a config without running it"),
                     ("synth", "generate a synthetic dataset from a config")):
        p = sub.add_parser(cmd, help=hlp)
        p.add_argument("config")
        p.add_argument("--output", default=None, help="output path override")
    p = sub.add_parser("report", help="pretty-print a report JSON")
    p.add_argument("path")
    args = parser.parse_args(argv)

    if args.command == "report":
        with open(args.path) as fh:
            rep = json.load(fh)
        _print_report(rep)
        return 0

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.output is not None:
            cfg["output"] = args.output
        if args.command == "validate":
            problems = validate_config(cfg)
            if problems:
                for p in problems:
                    print(f"error: {p}", file=sys.stderr)
                return 1
            if "dataset" in cfg:
                _load(cfg)
            print("config ok")
            return 0
        if args.command == "synth" and cfg.get("method", {}).get("name") != "synth":
            raise ConfigError("the synth subcommand needs a method block named 'synth'")
        run(cfg, workers=args.workers)
        return 0
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _print_report(rep: dict) -> None:
    print(f"snpkit report (version {rep.get('version', '?')})")
    print(f"method: {rep.get('method')}   seed: {rep.get('seed')}")
    cv = rep.get("cv_error")
    if cv:
        print(f"cv balanced error: {cv['value']:.4f}  (K={cv['K']})")
    perm = rep.get("permutation")
    if perm:
        print(f"permutation test: p={perm['p_value']:.4f} "
              f"(B={perm['B']}, bound {perm['accuracy_bound']:.3f}, "
              f"reject={perm['reject']})")
    for key in ("ranked_combos", "expression", "best_params", "tree"):
        if key in rep:
            print(f"{key}:")
            val = rep[key]
            if isinstance(val, list):
                for item in val:
                    print(f"  {item}")
            else:
                print(f"  {val}")
    imp = rep.get("importance")
    if imp:
        print("importance:")
        for row in imp:
            print(f"  {row['predictor']:>12s}  {row['cvim']:+.4f}  "
                  f"cond={row['conditioning']}")


if __name__ == "__main__":
    sys.exit(main())
