"""Synthetic ground-truth densities with exact evaluation and sampling.

Two families are provided: univariate mixtures of Fisher-Tippett (Gumbel)
densities, and multivariate mixtures whose components are products of
independent Gumbel densities laid out on a full grid of per-dimension modes.
"""

from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

GRID_CAP = 10**6


def gumbel_logpdf(x, mu, beta):
    z = (np.asarray(x, dtype=float) - mu) / beta
    with np.errstate(over="ignore"):  # far left tail: log-density is -inf
        return -np.log(beta) - z - np.exp(-z)


def gumbel_cdf(x, mu, beta):
    return np.exp(-np.exp(-(np.asarray(x, dtype=float) - mu) / beta))


def gumbel_quantile(u, mu, beta):
    return mu - beta * np.log(-np.log(u))


def _open_uniform(rng, size):
    u = rng.random(size)
    # inverse transform needs u in (0, 1)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    return u


@dataclass(frozen=True)
class FtMixture:
    """Mixture of ``c`` Gumbel densities with weights ``P``."""

    P: tuple
    mu: tuple
    beta: tuple

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if not (P.shape == mu.shape == beta.shape) or P.ndim != 1 or P.size == 0:
            raise ValueError("P, mu and beta must be nonempty vectors of equal length")
        if np.any(P < 0) or abs(P.sum() - 1.0) > 1e-12:
            raise ValueError("mixing coefficients must lie on the simplex")
        if np.any(beta <= 0):
            raise ValueError("scales must be positive")
        for name, arr in (("P", P), ("mu", mu), ("beta", beta)):
            object.__setattr__(self, name, tuple(arr.tolist()))

    @property
    def c(self) -> int:
        return len(self.P)

    @property
    def d(self) -> int:
        return 1

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1) if x.ndim < 2 else x[:, 0]
        P, mu, beta = (np.asarray(a) for a in (self.P, self.mu, self.beta))
        out = np.exp(gumbel_logpdf(flat[:, None], mu, beta)) @ P
        return float(out[0]) if x.ndim == 0 else out

    __call__ = pdf

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).reshape(-1)
        out = gumbel_cdf(flat[:, None], np.asarray(self.mu), np.asarray(self.beta)) @ np.asarray(self.P)
        return float(out[0]) if x.ndim == 0 else out

    def sample(self, count: int, rng) -> np.ndarray:
        """``count`` i.i.d. draws as a 1-D array."""
        labels = rng.choice(self.c, size=count, p=np.asarray(self.P))
        u = _open_uniform(rng, count)
        return gumbel_quantile(u, np.asarray(self.mu)[labels], np.asarray(self.beta)[labels])

    def to_dict(self) -> dict:
        return {"kind": "fisher-tippett", "P": list(self.P), "mu": list(self.mu),
                "beta": list(self.beta)}


def ft_pdf(mix: FtMixture, x):
    return mix.pdf(x)


def ft_sample(mix: FtMixture, count: int, rng) -> np.ndarray:
    return mix.sample(count, rng)


def ft_random_task(c: int, rng) -> FtMixture:
    """Random mixture: uniform-then-normalized weights, ``beta ~ U(0.01, 0.9)``,
    ``mu ~ U(0, 10)``."""
    if c < 1:
        raise ValueError("c must be at least 1")
    raw = rng.random(c)
    while raw.sum() == 0.0:
        raw = rng.random(c)
    P = raw / raw.sum()
    P[-1] = 1.0 - P[:-1].sum()
    beta = rng.uniform(0.01, 0.9, c)
    mu = rng.uniform(0.0, 10.0, c)
    return FtMixture(tuple(P), tuple(mu), tuple(beta))


@dataclass(frozen=True)
class MGev:
    """Equal-weight mixture of ``c**d`` products of independent Gumbels.

    ``mu_table`` and ``beta_table`` have shape ``(d, c)``; grid row ``k`` picks
    column ``index[k, i]`` of row ``i`` for every dimension ``i``.
    """

    mu_table: tuple
    beta_table: tuple
    cap: int = GRID_CAP

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.mu_table, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta_table, dtype=float))
        if mu.shape != beta.shape:
            raise ValueError("mu and beta tables must have the same shape")
        if np.any(beta <= 0):
            raise ValueError("scales must be positive")
        d, c = mu.shape
        if c ** d > self.cap:
            raise ValueError(f"grid of {c}^{d} components exceeds the cap {self.cap}")
        object.__setattr__(self, "mu_table", tuple(map(tuple, mu.tolist())))
        object.__setattr__(self, "beta_table", tuple(map(tuple, beta.tolist())))
        index = np.array(list(itertools.product(range(c), repeat=d)), dtype=int)
        object.__setattr__(self, "_index", index)
        rows = np.arange(d)
        object.__setattr__(self, "_mu", mu[rows, index])
        object.__setattr__(self, "_beta", beta[rows, index])

    @property
    def d(self) -> int:
        return len(self.mu_table)

    @property
    def c(self) -> int:
        return len(self.mu_table[0])

    @property
    def c_total(self) -> int:
        return self.c ** self.d

    @property
    def grid_index(self) -> np.ndarray:
        """``(c_T, d)`` per-dimension column indices of every grid component."""
        return self._index.copy()

    @property
    def mu(self) -> np.ndarray:
        return self._mu.copy()

    @property
    def beta(self) -> np.ndarray:
        return self._beta.copy()

    def _as_points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1 or (x.ndim == 0 and self.d == 1)
        xb = np.atleast_2d(x) if x.ndim else x.reshape(1, 1)
        if xb.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got shape {x.shape}")
        return xb, single

    def logpdf(self, x):
        xb, single = self._as_points(x)
        # (N, c_T) log-densities of each product component
        terms = np.zeros((len(xb), self.c_total))
        for i in range(self.d):
            terms += gumbel_logpdf(xb[:, i:i + 1], self._mu[:, i], self._beta[:, i])
        out = logsumexp(terms, axis=1) - np.log(self.c_total)
        return float(out[0]) if single else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    __call__ = pdf

    def marginal_cdf(self, i: int, x):
        """CDF of coordinate ``i``: uniform mixture of that row's Gumbels."""
        mu = np.asarray(self.mu_table[i])
        beta = np.asarray(self.beta_table[i])
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return gumbel_cdf(x[:, None], mu, beta).mean(axis=1)

    def sample(self, count: int, rng) -> np.ndarray:
        """``(count, d)`` i.i.d. draws."""
        labels = rng.integers(self.c_total, size=count)
        u = _open_uniform(rng, (count, self.d))
        return gumbel_quantile(u, self._mu[labels], self._beta[labels])

    def to_dict(self) -> dict:
        return {"kind": "m-gev", "mu_table": [list(r) for r in self.mu_table],
                "beta_table": [list(r) for r in self.beta_table]}


def mgev_pdf(target: MGev, x):
    return target.pdf(x)


def mgev_sample(target: MGev, count: int, rng) -> np.ndarray:
    return target.sample(count, rng)


def mgev_random_task(d: int, c: int, rng, cap: int = GRID_CAP) -> MGev:
    """Per-dimension modes ``mu ~ U(0.1, 0.9)`` and scales ``beta ~ U(0.03, 0.05)``."""
    if d < 1 or c < 1:
        raise ValueError("d and c must be at least 1")
    if c ** d > cap:
        raise ValueError(f"grid of {c}^{d} components exceeds the cap {cap}")
    mu = rng.uniform(0.1, 0.9, (d, c))
    beta = rng.uniform(0.03, 0.05, (d, c))
    return MGev(tuple(map(tuple, mu)), tuple(map(tuple, beta)), cap)


def target_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "fisher-tippett":
        return FtMixture(tuple(doc["P"]), tuple(doc["mu"]), tuple(doc["beta"]))
    if kind == "m-gev":
        return MGev(tuple(map(tuple, doc["mu_table"])), tuple(map(tuple, doc["beta_table"])))
    raise ValueError(f"unknown target kind {kind!r}")


def split_task(points: np.ndarray, n_train: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle, then the first ``n_train`` rows train and the rest validate."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if not 0 < n_train < len(points):
        raise ValueError("n_train must leave both splits nonempty")
    perm = rng.permutation(len(points))
    shuffled = points[perm]
    return shuffled[:n_train], shuffled[n_train:]


def write_dataset_csv(path, points: np.ndarray, generator: dict) -> None:
    """CSV with a ``#``-comment line carrying the generator JSON, then a header."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 1 and points.shape[1] > 1 and generator.get("d", 1) == 1:
        points = points.T
    buf = io.StringIO()
    buf.write("# " + json.dumps(generator, sort_keys=True) + "\n")
    buf.write(",".join(f"x{i + 1}" for i in range(points.shape[1])) + "\n")
    for row in points:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_dataset_csv(path) -> tuple[np.ndarray, dict]:
    """Inverse of :func:`write_dataset_csv`; returns ``(points, generator)``."""
    generator = {}
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#"):
            generator = json.loads(first[1:])
            fh.readline()  # header
        rows = [list(map(float, line.split(","))) for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"dataset {path} has no rows")
    return np.array(rows), generator
