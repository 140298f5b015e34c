"""End-to-end experiments: task generation, fitting, scoring, replication grids.

Raw data are mapped affinely into the model box before a DNMM is trained and
densities are mapped back with the Jacobian of that map.  Univariate tasks
use the box ``[-0.5, 10.5]`` and multivariate tasks ``[0, 1.1]^d``; the raw
region mapped onto the box is the union of the box and the training data
range padded by 15% per side.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baselines import KnnModel, ParzenModel, baseline_from_dict, gmm_fit
from .evaluation import (ise_mc, ise_simpson_1d, mean_log_likelihood, padded_interval,
                         relative_ise_reduction, welch_t_test)
from .integration import DomainBox
from .mixture import Dnmm, TrainConfig, TrainingFailure, train
from .selection import random_hyperparam_search
from .synthdata import ft_random_task, mgev_random_task, split_task, target_from_dict

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "dnmm-report/1"
BUNDLE_SCHEMA = "dnmm-replication/1"
MAPPED_FORMAT = "dnmm-mapped/1"
WORKERS_ENV = "DNMM_WORKERS"
UNIVARIATE_BOX = (-0.5, 10.5)
MULTIVARIATE_BOX = (0.0, 1.1)
DATA_PADDING = 0.15
SELECTION_GRID = tuple(np.geomspace(0.1, 10.0, 21).tolist())
MIN_REPLICATION_EPOCHS = 10
BASELINE_FAMILIES = ("gmm", "PW")
# proposal scale per unit of box width, from sigma = 9 on the width-11 univariate box
SIGMA_PER_WIDTH = 9.0 / 11.0

# Published ISE values for the univariate grid, keyed by estimator then c.
TABLE1_REFERENCE = {
    "8-GMM": {5: 9.60e-3, 10: 1.12e-2, 15: 4.57e-2, 20: 7.99e-2},
    "16-GMM": {5: 6.33e-3, 10: 9.29e-3, 15: 3.78e-2, 20: 4.24e-2},
    "32-GMM": {5: 7.15e-3, 10: 9.82e-3, 15: 2.41e-2, 20: 3.03e-2},
    "kn-NN": {5: 6.54e-3, 10: 8.70e-3, 15: 2.03e-2, 20: 2.36e-2},
    "PW": {5: 6.02e-3, 10: 8.94e-3, 15: 2.14e-2, 20: 1.98e-2},
    "4-DNMM": {5: 6.41e-3, 10: 7.06e-3, 15: 1.09e-2, 20: 1.40e-2},
    "8-DNMM": {5: 5.89e-3, 10: 6.02e-3, 15: 8.11e-3, 20: 1.01e-2},
    "12-DNMM": {5: 6.38e-3, 10: 6.27e-3, 15: 8.05e-3, 20: 9.64e-3},
}
TABLE1_C = (5, 10, 15, 20)

# Published relative ISE reductions (%) for the multivariate grid, keyed by d then C_T.
TABLE2_REFERENCE = {
    2: {4: 11.31, 9: 10.52, 16: 7.38, 25: 9.02},
    4: {4: 8.44, 9: -0.07, 16: 5.75, 25: 7.01},
    6: {4: 4.98, 9: -1.64, 16: 5.80, 25: 8.13},
    8: {4: 6.20, 9: 7.34, 16: 8.63, 25: 8.00},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# -- configuration --------------------------------------------------------


@dataclass
class TaskSpec:
    """``kind`` is ``"fisher-tippett"`` (uses ``c``) or ``"m-gev"`` (``c`` modes per dimension)."""

    kind: str = "fisher-tippett"
    c: int = 5
    d: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fisher-tippett", "m-gev"):
            raise ConfigError(f"unknown task kind {self.kind!r}")
        if self.c < 1 or self.d < 1:
            raise ConfigError("c and d must be positive")
        if self.kind == "fisher-tippett" and self.d != 1:
            raise ConfigError("Fisher-Tippett tasks are univariate")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one task: data, roster, training, scoring.

    ``parzen_h1`` or ``knn_k1`` set to ``None`` selects the value on a
    log grid over ``[0.1, 10]`` by validation likelihood.  ``search_budget``
    above zero tunes ``eta`` and ``rho`` of every DNMM by random search on
    validation likelihood.
    """

    task: TaskSpec = field(default_factory=TaskSpec)
    n_train: int = 800
    n_validation: int = 400
    dnmm_K: tuple = (4, 8, 12)
    hidden: tuple = (9,)
    half_width: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)
    gmm_K: tuple = (8, 16, 32)
    parzen: bool = True
    parzen_h1: float | None = 1.0
    knn: bool = True
    knn_k1: float | None = 1.0
    ise_nodes: int = 4001
    ise_samples: int = 100_000
    search_budget: int = 0
    search_space: dict = field(default_factory=lambda: {
        "eta": [1e-4, 1e-2, "log"], "rho": [1e-3, 1e-1, "log"]})

    def __post_init__(self):
        if isinstance(self.task, dict):
            self.task = TaskSpec(**self.task)
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        self.dnmm_K = tuple(int(k) for k in self.dnmm_K)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.gmm_K = tuple(int(k) for k in self.gmm_K)
        if self.n_train < 1 or self.n_validation < 1:
            raise ConfigError("both splits must be nonempty")
        if not (self.dnmm_K or self.gmm_K or self.parzen or self.knn):
            raise ConfigError("the estimator roster is empty")
        if any(k < 1 for k in self.dnmm_K + self.gmm_K):
            raise ConfigError("component counts must be positive")
        if self.ise_nodes < 3 or self.ise_nodes % 2 == 0:
            raise ConfigError("ise_nodes must be odd and at least 3")
        if self.search_budget < 0:
            raise ConfigError("search_budget must be nonnegative")

    @property
    def n_total(self) -> int:
        return self.n_train + self.n_validation

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["train"] = self.train.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


# -- data -----------------------------------------------------------------


def make_target(spec: TaskSpec, rng):
    if spec.kind == "fisher-tippett":
        return ft_random_task(spec.c, rng)
    return mgev_random_task(spec.d, spec.c, rng)


def generate_task(config: ExperimentConfig):
    """``(target, train, validation)`` replayable from the task seed alone."""
    rng = np.random.default_rng(config.task.seed)
    target = make_target(config.task, rng)
    points = target.sample(config.n_total, rng)
    train_set, validation = split_task(points, config.n_train, rng)
    return target, train_set, validation


def generator_record(config: ExperimentConfig, target) -> dict:
    return {"task": asdict(config.task), "n_train": config.n_train,
            "n_validation": config.n_validation, "target": target.to_dict()}


def default_box(d: int) -> DomainBox:
    low, high = UNIVARIATE_BOX if d == 1 else MULTIVARIATE_BOX
    return DomainBox.cube(low, high, d)


@dataclass(frozen=True)
class AffineMap:
    """Per-axis affine map from the raw region ``[raw_lower, raw_upper]`` onto ``box``."""

    raw_lower: tuple
    raw_upper: tuple
    box: DomainBox

    @classmethod
    def fit(cls, data, box: DomainBox, padding: float = DATA_PADDING) -> "AffineMap":
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        lo, hi = data.min(axis=0), data.max(axis=0)
        pad = padding * (hi - lo)
        raw_lo = np.minimum(box.lo, lo - pad)
        raw_hi = np.maximum(box.hi, hi + pad)
        return cls(tuple(raw_lo.tolist()), tuple(raw_hi.tolist()), box)

    @property
    def scale(self) -> np.ndarray:
        return self.box.widths / (np.asarray(self.raw_upper) - np.asarray(self.raw_lower))

    @property
    def jacobian(self) -> float:
        return float(np.prod(self.scale))

    def __call__(self, x) -> np.ndarray:
        return self.box.lo + (np.asarray(x, dtype=float) - np.asarray(self.raw_lower)) * self.scale

    def to_dict(self) -> dict:
        return {"raw_lower": list(self.raw_lower), "raw_upper": list(self.raw_upper),
                "box": self.box.to_dict()}

    @classmethod
    def from_dict(cls, doc: dict) -> "AffineMap":
        return cls(tuple(doc["raw_lower"]), tuple(doc["raw_upper"]),
                   DomainBox.from_dict(doc["box"]))


class MappedDnmm:
    """A DNMM trained on mapped data, evaluated as a density in raw coordinates."""

    def __init__(self, model: Dnmm, mapping: AffineMap, info: dict | None = None):
        if model.d != mapping.box.d:
            raise ValueError("model and map dimensions differ")
        self.model = model
        self.mapping = mapping
        self.info = dict(info or {})

    @property
    def d(self) -> int:
        return self.model.d

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and self.d == 1:
            x = x[:, None]
        return self.model.density(self.mapping(x)) * self.mapping.jacobian

    __call__ = pdf

    def to_dict(self) -> dict:
        return {"format": MAPPED_FORMAT, "model": self.model.to_dict(),
                "map": self.mapping.to_dict(), "info": self.info}

    @classmethod
    def from_dict(cls, doc: dict) -> "MappedDnmm":
        if doc.get("format") != MAPPED_FORMAT:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        return cls(Dnmm.from_dict(doc["model"]), AffineMap.from_dict(doc["map"]),
                   doc.get("info"))


def load_estimator(doc: dict):
    """A mapped DNMM or a baseline from its JSON document."""
    if doc.get("format") == MAPPED_FORMAT:
        return MappedDnmm.from_dict(doc)
    return baseline_from_dict(doc)


# -- fitting --------------------------------------------------------------


def fit_dnmm(train_set, K: int, config: ExperimentConfig, seed: int,
             train_config: TrainConfig | None = None):
    """Train one ``K``-component DNMM; returns ``(MappedDnmm, trace)``."""
    train_config = train_config or config.train
    train_config = TrainConfig.from_dict({**train_config.to_dict(), "seed": seed})
    d = train_set.shape[1]
    mapping = AffineMap.fit(train_set, default_box(d))
    init_rng = np.random.default_rng([seed, K])
    model = Dnmm.initialize(K, config.hidden, mapping.box, init_rng, config.half_width)
    start = time.perf_counter()
    _, trace = train(model, mapping(train_set), train_config)
    info = {"K": K, "hidden": list(config.hidden), "seed": seed,
            "train_config": train_config.to_dict(),
            "train_time": time.perf_counter() - start}
    return MappedDnmm(model, mapping, info), trace


def _select_by_likelihood(make, grid, validation):
    scored = [(mean_log_likelihood(make(v), validation)[0], v) for v in grid]
    return max(scored)[1]


def fit_baselines(train_set, validation, config: ExperimentConfig, seed: int) -> dict:
    """Fit the statistical roster; returns ``name -> (model, hyperparams)``."""
    out = {}
    for K in config.gmm_K:
        out[f"{K}-GMM"] = (gmm_fit(train_set, K, rng=np.random.default_rng([seed, K])),
                           {"K": K})
    if config.knn:
        k1 = config.knn_k1
        if k1 is None:
            k1 = _select_by_likelihood(lambda v: KnnModel(train_set, v), SELECTION_GRID,
                                       validation)
        out["kn-NN"] = (KnnModel(train_set, k1), {"k1": k1})
    if config.parzen:
        h1 = config.parzen_h1
        if h1 is None:
            h1 = _select_by_likelihood(lambda v: ParzenModel(train_set, v), SELECTION_GRID,
                                       validation)
        out["PW"] = (ParzenModel(train_set, h1), {"h1": h1})
    return out


def tune_dnmm(train_set, validation, K: int, config: ExperimentConfig, seed: int):
    """Random search over the configured space, then the winner's model."""
    def trial(hidden, hp, trial_seed):
        cfg = TrainConfig.from_dict({**config.train.to_dict(), **hp})
        model, _ = fit_dnmm(train_set, K, config, trial_seed, cfg)
        return mean_log_likelihood(model, validation)[0]

    result = random_hyperparam_search(trial, config.search_space, config.search_budget,
                                      np.random.default_rng([seed, K, 7]), config.hidden,
                                      train_set.shape[1], K)
    cfg = TrainConfig.from_dict({**config.train.to_dict(), **result.best.hyperparams})
    model, trace = fit_dnmm(train_set, K, config, result.best.seed, cfg)
    model.info["search"] = [c.to_dict() for c in result.trials]
    return model, trace


# -- scoring --------------------------------------------------------------


def ise_against(target, estimator, train_set, config: ExperimentConfig, seed: int):
    if target.d != train_set.shape[1]:
        raise ValueError(f"estimator dimension {train_set.shape[1]} != target dimension {target.d}")
    if target.d == 1:
        return ise_simpson_1d(target.pdf, estimator.pdf, padded_interval(train_set),
                              config.ise_nodes)
    box = default_box(target.d)
    # common random numbers: every estimator of a task sees the same points
    return ise_mc(target.pdf, estimator.pdf, box, config.ise_samples,
                  np.random.default_rng([seed, 99]))


def score_estimator(name, family, estimator, target, train_set, validation,
                    config: ExperimentConfig, seed: int, hyperparams=None,
                    train_time=None) -> dict:
    ise = ise_against(target, estimator, train_set, config, seed)
    ll, floored = mean_log_likelihood(estimator.pdf, validation)
    return {"name": name, "family": family, "status": "ok", "error": None,
            "ise": ise.value, "ise_method": ise.method, "ise_count": ise.count,
            "ise_stderr": ise.stderr, "validation_log_likelihood": ll,
            "likelihood_floored": floored, "train_time": train_time,
            "hyperparams": hyperparams or {}}


def _failed_row(name, family, error) -> dict:
    return {"name": name, "family": family, "status": "failed", "error": error,
            "ise": None, "ise_method": None, "ise_count": None, "ise_stderr": None,
            "validation_log_likelihood": None, "likelihood_floored": None,
            "train_time": None, "hyperparams": {}}


def pick_baseline(rows) -> str | None:
    """Normalized statistical estimator with the highest validation likelihood.

    The k_n-NN estimate does not integrate to one, so its likelihood is not
    comparable and it is never chosen.
    """
    stats_rows = [r for r in rows if r["family"] in BASELINE_FAMILIES and r["status"] == "ok"]
    if not stats_rows:
        return None
    return max(stats_rows, key=lambda r: r["validation_log_likelihood"])["name"]


def build_report(config: ExperimentConfig, rows, seed: int) -> dict:
    baseline = pick_baseline(rows)
    reductions = {}
    if baseline is not None:
        base_ise = next(r["ise"] for r in rows if r["name"] == baseline)
        for r in rows:
            if r["family"] == "dnmm" and r["status"] == "ok" and base_ise > 0:
                reductions[r["name"]] = relative_ise_reduction(base_ise, r["ise"])
    return {"schema": REPORT_SCHEMA, "seed": seed, "config": config.to_dict(),
            "estimators": rows, "baseline": baseline, "relative_ise_reduction": reductions}


def run_experiment(config: ExperimentConfig, seed: int | None = None,
                   model_dir=None) -> dict:
    """Generate the task, fit the roster, and score every estimator."""
    seed = config.task.seed if seed is None else seed
    target, train_set, validation = generate_task(config)
    rows = []
    for name, (model, hp) in fit_baselines(train_set, validation, config, seed).items():
        family = "gmm" if name.endswith("GMM") else name
        rows.append(score_estimator(name, family, model, target, train_set, validation,
                                    config, seed, hp))
    for K in config.dnmm_K:
        name = f"{K}-DNMM"
        try:
            if config.search_budget:
                model, trace = tune_dnmm(train_set, validation, K, config, seed)
            else:
                model, trace = fit_dnmm(train_set, K, config, seed)
        except TrainingFailure as exc:
            logger.warning("%s on seed %d failed: %s", name, seed, exc)
            rows.append(_failed_row(name, "dnmm", str(exc)))
            continue
        hp = {"K": K, "eta": model.info["train_config"]["eta"],
              "rho": model.info["train_config"]["rho"]}
        rows.append(score_estimator(name, "dnmm", model, target, train_set, validation,
                                    config, seed, hp, model.info["train_time"]))
        if model_dir is not None:
            with open(os.path.join(model_dir, f"{name}-seed{seed}.json"), "w") as fh:
                json.dump(model.to_dict(), fh)
            with open(os.path.join(model_dir, f"{name}-seed{seed}-trace.csv"), "w") as fh:
                fh.write(trace.to_csv())
    return build_report(config, rows, seed)


_FAMILIES = {"Gmm": "gmm", "ParzenModel": "PW", "KnnModel": "kn-NN"}


def evaluate_models(config: ExperimentConfig, estimators: dict, target, train_set,
                    validation, seed: int = 0, fit_roster: bool = True) -> dict:
    """Score given estimators (``name -> object with pdf``) plus the baseline roster."""
    rows = []
    if fit_roster:
        for name, (model, hp) in fit_baselines(train_set, validation, config, seed).items():
            family = "gmm" if name.endswith("GMM") else name
            rows.append(score_estimator(name, family, model, target, train_set,
                                        validation, config, seed, hp))
    for name, est in estimators.items():
        if getattr(est, "d", target.d) != target.d:
            raise ValueError(f"estimator {name} has dimension {est.d}, target {target.d}")
        family = "dnmm" if isinstance(est, MappedDnmm) else _FAMILIES.get(type(est).__name__)
        rows.append(score_estimator(name, family, est, target, train_set, validation,
                                    config, seed))
    return build_report(config, rows, seed)


# -- replication ------------------------------------------------------------


def _cell(args):
    config_doc, seed = args
    config = ExperimentConfig.from_dict(config_doc)
    return run_experiment(config, seed)


def _run_cells(cells, workers: int):
    if workers <= 1:
        return [_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, cells))


def _welch(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    keep = np.isfinite(a) & np.isfinite(b)
    try:
        a, b = a[keep], b[keep]
        w = welch_t_test(a, b)
    except ValueError as exc:
        return {"t": None, "df": None, "p_value": None, "note": str(exc)}
    return {"t": w.t, "df": w.df, "p_value": w.p_value, "note": None}


def _table1_config(c: int, seed: int, epochs: int) -> ExperimentConfig:
    cfg = ExperimentConfig(task=TaskSpec("fisher-tippett", c, 1, seed))
    cfg.train = TrainConfig.from_dict({**cfg.train.to_dict(), "epochs": epochs})
    return cfg


def _table2_config(d: int, c: int, seed: int, epochs: int, budget: int) -> ExperimentConfig:
    cfg = ExperimentConfig(task=TaskSpec("m-gev", c, d, seed), dnmm_K=(4, 8),
                           gmm_K=(4, 8, 16, 32), parzen_h1=None, knn_k1=None,
                           search_budget=budget)
    width = MULTIVARIATE_BOX[1] - MULTIVARIATE_BOX[0]
    cfg.train = TrainConfig.from_dict({**cfg.train.to_dict(), "epochs": epochs,
                                       "proposal": {"sigma": SIGMA_PER_WIDTH * width,
                                                    "burn_in": 500}})
    return cfg


def summarize_table1(reports) -> dict:
    """Median ISE per (estimator, c) across seeds, with the published values alongside."""
    cells = {}
    for rep in reports:
        c = rep["config"]["task"]["c"]
        for row in rep["estimators"]:
            cells.setdefault((row["name"], c), []).append(
                np.nan if row["ise"] is None else row["ise"])
            if row["name"] == rep["baseline"]:
                cells.setdefault(("baseline", c), []).append(row["ise"])
    measured = {}
    for (name, c), vals in cells.items():
        measured.setdefault(name, {})[c] = float(np.median(vals))
    welch = {}
    for (name, c), vals in cells.items():
        if name.endswith("DNMM") and ("baseline", c) in cells:
            welch.setdefault(name, {})[c] = _welch(vals, cells[("baseline", c)])
    return {"measured_median_ise": measured, "welch_vs_baseline": welch,
            "reference_published_ise": TABLE1_REFERENCE}


def summarize_table2(reports) -> dict:
    """Best DNMM reduction per seed, medians per (d, C_T), published values alongside."""
    cells = {}
    for rep in reports:
        task = rep["config"]["task"]
        key = (task["d"], task["c"] ** task["d"])
        red = rep["relative_ise_reduction"]
        cells.setdefault(key, []).append(max(red.values()) if red else np.nan)
    measured = {f"d={d},C_T={ct}": {"median": float(np.median(v)), "per_seed": v}
                for (d, ct), v in cells.items()}
    reference = {f"d={d},C_T={ct}": TABLE2_REFERENCE[d][ct] for (d, ct) in cells
                 if ct in TABLE2_REFERENCE.get(d, {})}
    return {"measured_reduction_percent": measured, "reference_published_reduction": reference}


def replicate(table: str, seeds, epochs: int = 100, workers: int = 1,
              search_budget: int = 4, full_grid: bool = False, c_values=None) -> dict:
    """Run the univariate grid (``"1"``) or the scaled multivariate grid (``"2-scaled"``)."""
    if epochs < MIN_REPLICATION_EPOCHS:
        raise ConfigError(f"replication needs at least {MIN_REPLICATION_EPOCHS} epochs")
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("need at least one seed")
    if table == "1":
        c_values = tuple(c_values or TABLE1_C)
        configs = [_table1_config(c, s, epochs) for c in c_values for s in seeds]
    elif table == "2-scaled":
        if search_budget < 1:
            raise ConfigError("the multivariate grid needs a search budget of at least 1")
        grid = ([(d, c) for d in (2, 4, 6, 8) for c in (2, 3)] if full_grid
                else [(2, 2), (2, 3)])
        configs = [_table2_config(d, c, s, epochs, search_budget)
                   for d, c in grid for s in seeds]
    else:
        raise ConfigError(f"unknown table {table!r}")
    reports = _run_cells([(cfg.to_dict(), cfg.task.seed) for cfg in configs], workers)
    summary = summarize_table1(reports) if table == "1" else summarize_table2(reports)
    return {"schema": BUNDLE_SCHEMA, "table": table, "seeds": seeds, "epochs": epochs,
            "summary": summary, "reports": reports}


def table1_csv(summary: dict) -> str:
    """Measured and published ISE side by side, one row per estimator."""
    measured = summary["measured_median_ise"]
    cs = sorted({c for row in measured.values() for c in row})
    head = ["estimator"] + [f"measured_c{c}" for c in cs] + [f"reference_c{c}" for c in cs]
    lines = [",".join(head)]
    for name in list(TABLE1_REFERENCE) + ["baseline"]:
        if name not in measured:
            continue
        ref = TABLE1_REFERENCE.get(name, {})
        vals = [repr(measured[name].get(c, float("nan"))) for c in cs]
        refs = [repr(ref[c]) if c in ref else "" for c in cs]
        lines.append(",".join([name] + vals + refs))
    return "\n".join(lines) + "\n"


def table2_csv(summary: dict) -> str:
    lines = ["d,C_T,measured_median_reduction,reference_reduction"]
    ref = summary["reference_published_reduction"]
    for key, val in summary["measured_reduction_percent"].items():
        d, ct = (part.split("=")[1] for part in key.split(","))
        lines.append(f"{d},{ct},{val['median']!r},{ref[key] if key in ref else ''}")
    return "\n".join(lines) + "\n"


def target_for(generator: dict):
    """The exact target density from a dataset's generator record."""
    if "target" not in generator:
        raise ValueError("the dataset carries no generator record")
    return target_from_dict(generator["target"])

