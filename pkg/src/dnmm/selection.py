"""Model selection by validation likelihood.

* :func:`incremental_width_search` widens the last hidden layer by ``u`` units
  per step; :func:`incremental_depth_search` appends one hidden layer per
  step.  Both stop once ``tau`` consecutive relative gains fall below
  ``nu`` percent, then return the smallest model among the final window whose
  likelihood is comparable to the window's best.
* :func:`random_hyperparam_search` draws training hyperparameters at random
  and returns the trial with the best validation likelihood.

``train_fn(hidden, hyperparams, seed)`` returns a validation mean
log-likelihood; it may raise to signal a failed trial, which is logged and
skipped.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field


from .network import parameter_count

logger = logging.getLogger(__name__)

COMPARABILITY_FRACTION = 0.005


class SearchError(RuntimeError):
    """Every candidate of a search failed."""


@dataclass(frozen=True)
class SearchConfig:
    """Stopping and tie-breaking settings of the incremental searches.

    ``nu`` is a percentage.  ``comparability`` is an absolute bound on the
    likelihood gap to the window's best; ``None`` uses half a percent of the
    window's best shifted likelihood.
    """

    u: int = 3
    nu: float = 1.0
    tau: int = 2
    comparability: float | None = None
    budget: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.u < 1:
            raise ValueError("u must be at least 1")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.comparability is not None and self.comparability < 0:
            raise ValueError("comparability must be nonnegative")


@dataclass
class Candidate:
    """One evaluated model: hidden widths, hyperparameters, score, size."""

    hidden: tuple
    hyperparams: dict
    log_likelihood: float
    n_params: int
    seed: int
    index: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {"index": self.index, "hidden": list(self.hidden),
                "hyperparams": self.hyperparams, "log_likelihood": self.log_likelihood,
                "n_params": self.n_params, "seed": self.seed, "wall_time": self.wall_time}


@dataclass
class SearchResult:
    best: Candidate
    trials: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def trial_log_csv(self) -> str:
        return trial_log_csv(self.trials)


def model_size(hidden, input_dim: int = 1, components: int = 1) -> int:
    """Trainable parameter count of a mixture of ``components`` networks."""
    return components * parameter_count((input_dim, *hidden, 1))


def trial_log_csv(trials) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["candidate", "hidden", "hyperparams", "seed",
                     "validation_log_likelihood", "n_params", "wall_time"])
    for c in trials:
        writer.writerow([c.index, "-".join(map(str, c.hidden)),
                         json.dumps(c.hyperparams, sort_keys=True), c.seed,
                         repr(c.log_likelihood), c.n_params, f"{c.wall_time:.3f}"])
    return buf.getvalue()


def _evaluate(train_fn, hidden, hyperparams, seed, index, input_dim, components):
    start = time.perf_counter()
    try:
        ll = float(train_fn(tuple(hidden), dict(hyperparams), seed))
    except Exception as exc:  # a failed trial is skipped, never fatal
        logger.warning("candidate %d %s failed: %s", index, hidden, exc)
        return None, repr(exc)
    if not math.isfinite(ll):
        logger.warning("candidate %d %s returned %r", index, hidden, ll)
        return None, f"non-finite likelihood {ll!r}"
    return Candidate(tuple(hidden), dict(hyperparams), ll,
                     model_size(hidden, input_dim, components), seed, index,
                     time.perf_counter() - start), None


def select_comparable(window, shift: float, comparability: float | None) -> Candidate:
    """Smallest candidate of ``window`` within the threshold of its best."""
    best = max(c.log_likelihood for c in window)
    if comparability is None:
        comparability = COMPARABILITY_FRACTION * abs(best + shift)
    close = [c for c in window if best - c.log_likelihood <= comparability]
    return min(close, key=lambda c: (c.n_params, c.index))


def _incremental_search(train_fn, base_hidden, grow, config: SearchConfig,
                        hyperparams, input_dim, components) -> SearchResult:
    hidden = tuple(base_hidden)
    trials, failures = [], []
    shift = None
    slow = 0
    for index in range(config.budget):
        cand, err = _evaluate(train_fn, hidden, hyperparams or {}, config.seed, index,
                              input_dim, components)
        if cand is None:
            failures.append((index, hidden, err))
        else:
            if shift is None:
                # shift so the first successful likelihood is at least 1
                shift = max(0.0, 1.0 - cand.log_likelihood)
            if trials:
                prev = trials[-1].log_likelihood + shift
                gain = 100.0 * (cand.log_likelihood + shift - prev) / abs(prev)
                slow = slow + 1 if gain < config.nu else 0
            trials.append(cand)
            if slow >= config.tau:
                break
        hidden = grow(hidden)
    if not trials:
        raise SearchError(f"all {len(failures)} candidates failed")
    window = trials[-(config.tau + 1):]
    return SearchResult(select_comparable(window, shift, config.comparability),
                        trials, failures)


def incremental_width_search(train_fn, base_hidden=(3,), config: SearchConfig | None = None,
                             hyperparams=None, input_dim: int = 1,
                             components: int = 1) -> SearchResult:
    """Grow the last hidden layer by ``config.u`` units per step."""
    config = config or SearchConfig()

    def grow(hidden):
        return (*hidden[:-1], hidden[-1] + config.u)
    return _incremental_search(train_fn, base_hidden, grow, config, hyperparams,
                               input_dim, components)


def incremental_depth_search(train_fn, base_hidden=(9,), config: SearchConfig | None = None,
                             hyperparams=None, input_dim: int = 1,
                             components: int = 1) -> SearchResult:
    """Append a hidden layer as wide as the current last one per step."""
    config = config or SearchConfig()

    def grow(hidden):
        return (*hidden, hidden[-1])
    return _incremental_search(train_fn, base_hidden, grow, config, hyperparams,
                               input_dim, components)


# -- random search ------------------------------------------------------


@dataclass(frozen=True)
class ParamRange:
    """Sampling range of one hyperparameter.

    ``scale`` is ``"linear"``, ``"log"`` (log-uniform) or ``"int"`` (uniform
    integer, both ends included).
    """

    low: float
    high: float
    scale: str = "linear"

    def __post_init__(self):
        if self.scale not in ("linear", "log", "int"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if not self.high >= self.low:
            raise ValueError("high must not be below low")
        if self.scale == "log" and not self.low > 0:
            raise ValueError("log-uniform ranges need a positive lower end")

    def draw(self, rng):
        if self.scale == "log":
            return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))
        if self.scale == "int":
            return int(rng.integers(int(self.low), int(self.high) + 1))
        return float(rng.uniform(self.low, self.high))


def parse_space(space: dict) -> dict:
    """Accept ``ParamRange`` values or ``[low, high]`` / ``[low, high, scale]`` lists."""
    out = {}
    for name, spec in space.items():
        out[name] = spec if isinstance(spec, ParamRange) else ParamRange(*spec)
    return out


def random_hyperparam_search(train_fn, space: dict, budget: int, rng, hidden=(9,),
                             input_dim: int = 1, components: int = 1) -> SearchResult:
    """Evaluate ``budget`` random assignments and return the best.

    Draws and trial seeds come from ``rng``, so equal seeds reproduce the
    whole trial sequence.
    """
    if not space:
        raise ValueError("the search space is empty")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    ranges = parse_space(space)
    trials, failures = [], []
    for index in range(budget):
        hp = {name: r.draw(rng) for name, r in ranges.items()}
        seed = int(rng.integers(2**31 - 1))
        cand, err = _evaluate(train_fn, hidden, hp, seed, index, input_dim, components)
        if cand is None:
            failures.append((index, hp, err))
        else:
            trials.append(cand)
    if not trials:
        raise SearchError(f"all {budget} trials failed")
    best = max(trials, key=lambda c: c.log_likelihood)
    return SearchResult(best, trials, failures)
