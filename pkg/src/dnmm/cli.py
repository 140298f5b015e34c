"""Command-line runner: ``dnmm {gen-data,train,evaluate,select,replicate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
training failure.  ``DNMM_WORKERS`` sets the default worker count.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import experiment as ex
from .evaluation import mean_log_likelihood, padded_interval
from .mixture import TrainConfig, TrainingFailure
from .selection import (SearchConfig, SearchError, incremental_depth_search,
                        incremental_width_search, random_hyperparam_search)
from .synthdata import read_dataset_csv, write_dataset_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("dnmm")


def _config(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config) if args.config else ex.ExperimentConfig()
    overrides = {}
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "seed", None) is not None and args.command == "train":
        overrides["seed"] = args.seed
    if overrides:
        cfg.train = TrainConfig.from_dict({**cfg.train.to_dict(), **overrides})
    return cfg


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_split(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    return read_dataset_csv(path)


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    if args.kind or args.c or args.d or args.seed is not None:
        task = cfg.task
        cfg.task = ex.TaskSpec(args.kind or task.kind, args.c or task.c, args.d or task.d,
                               task.seed if args.seed is None else args.seed)
    target, train_set, validation = ex.generate_task(cfg)
    record = ex.generator_record(cfg, target)
    os.makedirs(args.out, exist_ok=True)
    write_dataset_csv(os.path.join(args.out, "train.csv"), train_set, record)
    write_dataset_csv(os.path.join(args.out, "validation.csv"), validation, record)
    print(f"wrote {len(train_set)} training and {len(validation)} validation rows to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    train_set, _ = _read_split(args.train)
    os.makedirs(args.out, exist_ok=True)
    seed = cfg.train.seed
    for K in args.K or cfg.dnmm_K:
        try:
            model, trace = ex.fit_dnmm(train_set, K, cfg, seed)
        except TrainingFailure as exc:
            print(f"error: training the {K}-component model failed: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        _write_json(os.path.join(args.out, f"{K}-DNMM.json"), model.to_dict())
        with open(os.path.join(args.out, f"{K}-DNMM-trace.csv"), "w") as fh:
            fh.write(trace.to_csv())
        if args.validation:
            val, _ = _read_split(args.validation)
            ll = mean_log_likelihood(model, val)[0]
            print(f"{K}-DNMM: validation mean log-likelihood {ll:.6g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    train_set, generator = _read_split(args.train)
    validation, _ = _read_split(args.validation)
    target = ex.target_for(generator)
    estimators = {}
    for path in args.models:
        with open(path) as fh:
            doc = json.load(fh)
        name = os.path.splitext(os.path.basename(path))[0]
        estimators[name] = ex.load_estimator(doc)
    report = ex.evaluate_models(cfg, estimators, target, train_set, validation,
                                seed=cfg.task.seed, fit_roster=not args.no_roster)
    _write_json(args.out, report)
    if args.curves:
        write_curves(args.curves, target, estimators, train_set)
    print(f"baseline: {report['baseline']}")
    for name, pct in report["relative_ise_reduction"].items():
        print(f"{name}: relative ISE reduction {pct:.2f}%")
    return EXIT_OK


def write_curves(directory, target, estimators: dict, train_set, points: int = 501) -> None:
    """Two-column ``x density`` files for plotting univariate fits."""
    if target.d != 1:
        raise ValueError("density curves are written for univariate tasks only")
    os.makedirs(directory, exist_ok=True)
    x = np.linspace(*padded_interval(train_set), points)
    curves = {"truth": target.pdf(x), **{n: e.pdf(x[:, None]) for n, e in estimators.items()}}
    for name, y in curves.items():
        np.savetxt(os.path.join(directory, f"{name}.dat"), np.column_stack([x, y]),
                   fmt="%.10g", header=f"x {name}")


def cmd_select(args) -> int:
    cfg = _config(args)
    train_set, _ = _read_split(args.train)
    validation, _ = _read_split(args.validation)
    K = args.K[0] if args.K else cfg.dnmm_K[0]
    d = train_set.shape[1]

    def train_fn(hidden, hp, seed):
        run_cfg = ex.ExperimentConfig.from_dict({**cfg.to_dict(), "hidden": list(hidden)})
        tc = TrainConfig.from_dict({**cfg.train.to_dict(), **hp})
        model, _ = ex.fit_dnmm(train_set, K, run_cfg, seed, tc)
        return mean_log_likelihood(model, validation)[0]

    log_path = os.path.join(args.out, "trials.csv")
    os.makedirs(args.out, exist_ok=True)
    try:
        if args.method == "random":
            result = random_hyperparam_search(train_fn, cfg.search_space, args.budget,
                                              np.random.default_rng(args.seed or 0),
                                              cfg.hidden, d, K)
        else:
            search = SearchConfig(u=args.u, nu=args.nu, tau=args.tau, budget=args.budget,
                                  seed=args.seed or 0)
            fn = incremental_width_search if args.method == "width" else incremental_depth_search
            result = fn(train_fn, cfg.hidden, search, None, d, K)
    except SearchError as exc:
        print(f"error: {exc}; trial log at {log_path}", file=sys.stderr)
        return EXIT_RUNTIME
    with open(log_path, "w") as fh:
        fh.write(result.trial_log_csv())
    _write_json(os.path.join(args.out, "winner.json"), result.best.to_dict())
    print(f"winner: hidden={result.best.hidden} hyperparams={result.best.hyperparams} "
          f"log-likelihood={result.best.log_likelihood:.6g}")
    return EXIT_OK


def cmd_replicate(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    bundle = ex.replicate(args.table, seeds, epochs=args.epochs or 100,
                          workers=args.workers, search_budget=args.search_budget,
                          full_grid=args.full_grid)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "bundle.json"), bundle)
    table = (ex.table1_csv(bundle["summary"]) if args.table == "1"
             else ex.table2_csv(bundle["summary"]))
    with open(os.path.join(args.out, "summary.csv"), "w") as fh:
        fh.write(table)
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnmm", description="Deep neural mixture density estimation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment configuration JSON")
        p.add_argument("--epochs", type=int)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("gen-data", help="write train/validation CSVs for a synthetic task")
    common(p)
    p.add_argument("--kind", choices=("fisher-tippett", "m-gev"))
    p.add_argument("--c", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train DNMMs on a dataset")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--validation")
    p.add_argument("--K", type=int, nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score models against the generating density")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--models", nargs="*", default=[])
    p.add_argument("--no-roster", action="store_true", help="skip fitting the baseline roster")
    p.add_argument("--curves", help="directory for two-column density curve files (d = 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select", help="model selection by validation likelihood")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--method", choices=("random", "width", "depth"), default="random")
    p.add_argument("--budget", type=int, default=10)
    p.add_argument("--K", type=int, nargs=1)
    p.add_argument("--u", type=int, default=3)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--tau", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("replicate", help="run a published experiment grid")
    p.add_argument("--table", choices=("1", "2-scaled"), required=True)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int)
    p.add_argument("--search-budget", type=int, default=4)
    p.add_argument("--full-grid", action="store_true",
                   help="multivariate grid up to d = 8 (long run)")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", None) is None and args.command == "replicate":
            args.workers = ex.default_workers()
        return args.func(args)
    except (ex.ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, TrainingFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
