"""Statistical density estimators used as baselines.

* :class:`Gmm`: Gaussian mixture initialized by k-means and refined by EM.
* :class:`ParzenModel`: Gaussian-kernel Parzen window, ``h_n = h1 / sqrt(n)``.
* :class:`KnnModel`: ``k_n``-nearest-neighbor estimate with
  ``k_n = round(k1 * sqrt(n))``.  Not a proper density (it does not integrate
  to one).
"""

from __future__ import annotations

import json
import math

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans

VARIANCE_FLOOR = 1e-6
KNN_RADIUS_FLOOR = 1e-6
FULL_COVARIANCE_MAX_DIM = 4
_CHUNK = 2048


def _as_points(x, d: int | None = None) -> tuple[np.ndarray, bool]:
    """Normalize input to an ``(N, d)`` array; a 1-D input is one point unless d == 1."""
    x = np.asarray(x, dtype=float)
    single = False
    if x.ndim == 0:
        x, single = x.reshape(1, 1), True
    elif x.ndim == 1:
        if d == 1:
            x = x[:, None]
        else:
            x, single = x[None, :], True
    if d is not None and x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {x.shape}")
    return x, single


def _data_matrix(data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("data must be a nonempty (n, d) array")
    return data


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in ``R^d``."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# -- Gaussian mixture -----------------------------------------------------


class Gmm:
    """Gaussian mixture with full (``d <= 4``) or diagonal covariances.

    Attributes
    ----------
    weights : (K,) array
    means : (K, d) array
    covariances : (K, d, d) array (diagonal matrices in the diagonal case)
    log_likelihood_trace : list of float
        Mean training log-likelihood after initialization and every EM step.
    """

    def __init__(self, weights, means, covariances, diagonal=None):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.covariances = np.asarray(covariances, dtype=float)
        K, d = self.means.shape
        if self.covariances.shape != (K, d, d):
            raise ValueError("covariances must have shape (K, d, d)")
        if self.weights.shape != (K,) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a simplex vector of length K")
        self.diagonal = d > FULL_COVARIANCE_MAX_DIM if diagonal is None else bool(diagonal)
        self.log_likelihood_trace: list[float] = []
        self.converged = False

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def _component_logpdf(self, x: np.ndarray) -> np.ndarray:
        """``(N, K)`` log N(x; mu_k, Sigma_k)."""
        out = np.empty((len(x), self.K))
        for k in range(self.K):
            diff = x - self.means[k]
            if self.diagonal:
                var = np.diag(self.covariances[k])
                maha = np.sum(diff ** 2 / var, axis=1)
                logdet = np.sum(np.log(var))
            else:
                chol = np.linalg.cholesky(self.covariances[k])
                sol = np.linalg.solve(chol, diff.T)
                maha = np.sum(sol ** 2, axis=0)
                logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[:, k] = -0.5 * (self.d * math.log(2 * math.pi) + logdet + maha)
        return out

    def _weighted_logpdf(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self._component_logpdf(x) + np.log(self.weights)

    def logpdf(self, x):
        xb, single = _as_points(x, self.d)
        out = logsumexp(self._weighted_logpdf(xb), axis=1)
        return float(out[0]) if single else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    __call__ = pdf

    def mean_log_likelihood(self, data) -> float:
        return float(np.mean(self.logpdf(_data_matrix(data))))

    def to_dict(self) -> dict:
        return {"kind": "gmm", "weights": self.weights.tolist(),
                "means": self.means.tolist(), "covariances": self.covariances.tolist(),
                "diagonal": self.diagonal}

    @classmethod
    def from_dict(cls, doc: dict) -> "Gmm":
        return cls(doc["weights"], doc["means"], doc["covariances"], doc["diagonal"])


def _floor_covariance(cov: np.ndarray, diagonal: bool, floor: float) -> np.ndarray:
    """Constrained ML covariance: clamp eigenvalues (or variances) at ``floor``."""
    if diagonal:
        return np.diag(np.maximum(np.diag(cov), floor))
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _m_step(data, resp, diagonal, floor, rng, previous_means=None):
    n, d = data.shape
    nk = resp.sum(axis=0)
    K = resp.shape[1]
    means = np.empty((K, d))
    covs = np.empty((K, d, d))
    for k in range(K):
        if nk[k] <= 10 * np.finfo(float).tiny:
            # empty component: re-seed its mean from a random datum
            means[k] = data[rng.integers(n)]
            covs[k] = np.eye(d) * max(floor, float(np.mean(np.var(data, axis=0))))
            continue
        means[k] = resp[:, k] @ data / nk[k]
        diff = data - means[k]
        cov = (resp[:, k, None] * diff).T @ diff / nk[k]
        covs[k] = _floor_covariance(cov, diagonal, floor)
    weights = nk / nk.sum()
    weights[-1] = 1.0 - weights[:-1].sum()
    return np.clip(weights, 0.0, None), means, covs


def gmm_fit(data, K: int, rng=None, max_iters: int = 200, tol: float = 1e-8,
            variance_floor: float = VARIANCE_FLOOR, seed: int | None = None) -> Gmm:
    """Fit a ``K``-component Gaussian mixture by k-means initialization and EM.

    k-means uses 10 restarts of at most 100 iterations and keeps the best
    inertia.  EM stops when the gain in mean log-likelihood drops below
    ``tol`` or after ``max_iters`` steps.  Covariances are full for
    ``d <= 4`` and diagonal otherwise, with eigenvalues floored at
    ``variance_floor``.

    Raises
    ------
    ValueError
        Fewer points than components.
    """
    data = _data_matrix(data)
    n, d = data.shape
    if K < 1:
        raise ValueError("K must be at least 1")
    if n < K:
        raise ValueError(f"need at least K={K} points, got {n}")
    rng = np.random.default_rng(seed) if rng is None else rng
    diagonal = d > FULL_COVARIANCE_MAX_DIM

    km_seed = int(rng.integers(2**31 - 1))
    km = KMeans(n_clusters=K, n_init=10, max_iter=100, random_state=km_seed).fit(data)
    resp = np.zeros((n, K))
    resp[np.arange(n), km.labels_] = 1.0
    weights, means, covs = _m_step(data, resp, diagonal, variance_floor, rng)
    model = Gmm(weights, means, covs, diagonal)

    ll = model.mean_log_likelihood(data)
    model.log_likelihood_trace.append(ll)
    for _ in range(max_iters):
        logp = model._weighted_logpdf(data)
        resp = np.exp(logp - logsumexp(logp, axis=1, keepdims=True))
        weights, means, covs = _m_step(data, resp, diagonal, variance_floor, rng)
        model.weights, model.means, model.covariances = weights, means, covs
        new_ll = model.mean_log_likelihood(data)
        model.log_likelihood_trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < tol:
            model.converged = True
            break
    return model


# -- Parzen window ------------------------------------------------------


class ParzenModel:
    """Gaussian-kernel Parzen window with isotropic bandwidth ``h1 / sqrt(n)``."""

    def __init__(self, data, h1: float = 1.0):
        self.data = _data_matrix(data)
        if not h1 > 0:
            raise ValueError("h1 must be positive")
        self.h1 = float(h1)

    @property
    def n(self) -> int:
        return len(self.data)

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def bandwidth(self) -> float:
        return self.h1 / math.sqrt(self.n)

    def logpdf(self, x):
        xb, single = _as_points(x, self.d)
        h = self.bandwidth
        const = -math.log(self.n) - self.d * (math.log(h) + 0.5 * math.log(2 * math.pi))
        out = np.empty(len(xb))
        sq_data = np.sum(self.data ** 2, axis=1)
        for i in range(0, len(xb), _CHUNK):
            xc = xb[i:i + _CHUNK]
            sq = np.sum(xc ** 2, axis=1)[:, None] - 2 * xc @ self.data.T + sq_data
            out[i:i + _CHUNK] = logsumexp(-0.5 * np.maximum(sq, 0.0) / h ** 2, axis=1)
        out += const
        return float(out[0]) if single else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    __call__ = pdf

    def to_dict(self) -> dict:
        return {"kind": "parzen", "h1": self.h1, "data": self.data.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "ParzenModel":
        return cls(doc["data"], doc["h1"])


def parzen_pdf(model: ParzenModel, x):
    return model.pdf(x)


# -- k_n nearest neighbors ----------------------------------------------


def knn_count(k1: float, n: int) -> int:
    """``round(k1 * sqrt(n))`` rounding halves up, clamped to ``[1, n]``."""
    return int(min(max(math.floor(k1 * math.sqrt(n) + 0.5), 1), n))


class KnnModel:
    """``k_n / (n * V_d * r^d)`` with ``r`` the distance to the ``k_n``-th neighbor.

    Sample points coinciding with the query count as neighbors.  When
    ``r = 0`` the radius is replaced by ``KNN_RADIUS_FLOOR``, which caps the
    value.
    """

    def __init__(self, data, k1: float = 1.0):
        self.data = _data_matrix(data)
        if not k1 > 0:
            raise ValueError("k1 must be positive")
        self.k1 = float(k1)

    @property
    def n(self) -> int:
        return len(self.data)

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def k(self) -> int:
        return knn_count(self.k1, self.n)

    def radius(self, x):
        xb, single = _as_points(x, self.d)
        k = self.k
        out = np.empty(len(xb))
        for i in range(0, len(xb), _CHUNK):
            diff = xb[i:i + _CHUNK, None, :] - self.data[None, :, :]
            dist = np.sqrt(np.sum(diff ** 2, axis=2))
            out[i:i + _CHUNK] = np.partition(dist, k - 1, axis=1)[:, k - 1]
        return float(out[0]) if single else out

    def pdf(self, x):
        xb, single = _as_points(x, self.d)
        r = np.maximum(self.radius(xb), KNN_RADIUS_FLOOR)
        out = self.k / (self.n * unit_ball_volume(self.d) * r ** self.d)
        return float(out[0]) if single else out

    __call__ = pdf

    def logpdf(self, x):
        return np.log(self.pdf(x))

    def to_dict(self) -> dict:
        return {"kind": "knn", "k1": self.k1, "data": self.data.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "KnnModel":
        return cls(doc["data"], doc["k1"])


def knn_pdf(model: KnnModel, x):
    return model.pdf(x)


def baseline_from_dict(doc: dict):
    kinds = {"gmm": Gmm, "parzen": ParzenModel, "knn": KnnModel}
    try:
        return kinds[doc["kind"]].from_dict(doc)
    except KeyError:
        raise ValueError(f"unknown baseline kind {doc.get('kind')!r}") from None


def save_baseline(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_baseline(path):
    with open(path) as fh:
        return baseline_from_dict(json.load(fh))
