"""Monte Carlo integration over a box with annealed Metropolis-Hastings sampling.

Integration points for a component are drawn from the mixture

    p_u(x) = alpha(t) * uniform_S(x) + (1 - alpha(t)) * phi(x) / Z

where ``phi`` is the (unnormalized) component function and ``alpha`` decays
with the epoch index.  Draws from ``phi / Z`` come from a Metropolis-Hastings
chain with a logistic random-walk proposal, so ``Z`` is never needed for
sampling itself; it is only needed to record the sampling density used by the
importance-weighted estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

VOLUME_MEAN = "volume-mean"
IMPORTANCE = "importance-weighted"
MODES = (VOLUME_MEAN, IMPORTANCE)


class DegenerateSamplerError(ValueError):
    """The recorded sampling density is not positive at some point."""


class ChainStartError(ValueError):
    """The Metropolis-Hastings start point has zero target density."""


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned box ``S = [lower, upper]`` in ``R^d``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError(f"empty box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @classmethod
    def cube(cls, low: float, high: float, d: int) -> "DomainBox":
        return cls((low,) * d, (high,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x) -> np.ndarray | bool:
        """Membership test for one point (bool) or an ``(N, d)`` batch."""
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=-1)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def uniform(self, rng, size: int) -> np.ndarray:
        return self.lo + self.widths * rng.random((size, self.d))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, doc) -> "DomainBox":
        return cls(doc["lower"], doc["upper"])


@dataclass(frozen=True)
class AnnealSchedule:
    theta: float = 0.07
    total_epochs: int = 100

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be at least 1")


@dataclass(frozen=True)
class ProposalConfig:
    sigma: float = 9.0
    burn_in: int = 500

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")


@dataclass
class IntegrationBatch:
    """Integration points for one component and one epoch.

    ``sample_pdf_values`` holds the density of the sampling mixture at every
    point and is only present in importance-weighted mode.  ``from_uniform``
    records which branch of the mixture produced each point.
    """

    points: np.ndarray
    mode: str = VOLUME_MEAN
    sample_pdf_values: np.ndarray | None = None
    from_uniform: np.ndarray | None = field(default=None, repr=False)
    alpha: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.points) < 1:
            raise ValueError("a batch needs at least one point")
        if self.mode == IMPORTANCE and self.sample_pdf_values is None:
            raise ValueError("importance-weighted mode needs sample_pdf_values")

    @property
    def m(self) -> int:
        return len(self.points)


def alpha(t: int, schedule: AnnealSchedule) -> float:
    """Share of uniform draws at epoch ``t`` (1-based): a decreasing logistic."""
    if not 1 <= t <= schedule.total_epochs:
        raise ValueError(f"epoch {t} outside 1..{schedule.total_epochs}")
    z = (t / schedule.total_epochs - 0.5) / schedule.theta
    # 1 / (1 + e^z) evaluated without overflow for large |z|
    if z > 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def logistic_quantile(u):
    """Quantile of the standard logistic distribution, ``ln(u / (1 - u))``."""
    u = np.asarray(u, dtype=float)
    return np.log(u) - np.log1p(-u)


def sample_proposal(x, sigma: float, rng=None, u=None) -> np.ndarray:
    """Draw ``x' = x + sigma * logit(u)`` coordinate-wise.

    ``u`` may be supplied directly (values in ``(0, 1)``); otherwise it is
    drawn from ``rng``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if u is None:
        u = rng.random(x.shape)
        # random() can return exactly 0.0
        while np.any(u == 0.0):
            u = np.where(u == 0.0, rng.random(x.shape), u)
    return x + sigma * logistic_quantile(u)


def proposal_density(x_new, x, sigma: float) -> float:
    """Density of the product-logistic proposal ``q(x_new | x, sigma)``."""
    z = (np.atleast_1d(np.asarray(x_new, dtype=float))
         - np.atleast_1d(np.asarray(x, dtype=float))) / sigma
    # e^z / (1 + e^z)^2 is even in z; use -|z| for stability
    a = -np.abs(z)
    log_q = a - 2.0 * np.log1p(np.exp(a)) - math.log(sigma)
    return float(np.exp(np.sum(log_q)))


def draw_chain_randomness(config: ProposalConfig, count: int, d: int, rng):
    """Proposal offsets ``(burn_in + count, d)`` and acceptance uniforms."""
    total = config.burn_in + count
    u = rng.random((total, d))
    u[u == 0.0] = 0.5
    return config.sigma * logistic_quantile(u), rng.random(total)


def metropolis_hastings(target, start, config: ProposalConfig, count: int, rng,
                        box: DomainBox | None = None, return_acceptance=False):
    """Run a random-walk Metropolis-Hastings chain on ``target``.

    Parameters
    ----------
    target : callable
        Nonnegative, possibly unnormalized density evaluated at one point.
    start : array_like
        Initial state, with ``target(start) > 0``.
    config : ProposalConfig
        Proposal scale and number of discarded burn-in states.
    count : int
        Number of post-burn-in states to return.
    box : DomainBox, optional
        Proposals outside the box are rejected outright.

    Returns
    -------
    ndarray of shape ``(count, d)``, and the acceptance rate over all steps if
    ``return_acceptance`` is set.
    """
    x = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    fx = float(target(x))
    if fx < 0:
        raise ValueError(f"target returned a negative value {fx}")
    if fx == 0:
        raise ChainStartError("target density is zero at the chain start")
    if box is not None and not box.contains(x):
        raise ChainStartError("chain start lies outside the box")

    d = x.size
    total = config.burn_in + count
    # Pre-draw all randomness: proposal offsets and acceptance uniforms.
    steps, accept_u = draw_chain_randomness(config, count, d, rng)

    out = np.empty((count, d))
    accepted = 0
    for i in range(total):
        cand = x + steps[i]
        if box is None or box.contains(cand):
            fc = float(target(cand))
            if fc < 0:
                raise ValueError(f"target returned a negative value {fc}")
            # symmetric proposal: accept with probability min(1, fc / fx)
            if fc >= fx or accept_u[i] * fx < fc:
                x, fx = cand, fc
                accepted += 1
        if i >= config.burn_in:
            out[i - config.burn_in] = x
    if return_acceptance:
        return out, accepted / total
    return out


def mixture_normalizer(phi, alpha_value: float, volume: float) -> float:
    """Self-consistent integral of ``phi`` from points drawn from the annealed mixture.

    Solves ``Z = mean(phi / (alpha / V + (1 - alpha) * phi / Z))`` for
    ``Z > 0``: if ``Z`` is the true integral, the denominator is the exact
    sampling density and the right-hand side is the importance-weighted
    estimate of ``Z``.  The solution is unique because
    ``mean(phi / (alpha Z / V + (1 - alpha) phi))`` decreases strictly in
    ``Z``.  With ``alpha = 1`` this is the plain uniform estimate.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise ValueError("component values must be finite and nonnegative")
    if not np.any(phi > 0):
        raise DegenerateSamplerError("component vanishes at every integration point")
    if alpha_value >= 1.0:
        return float(volume * phi.mean())
    if alpha_value <= 0.0:
        raise DegenerateSamplerError("the normalizer is not identifiable without uniform draws")
    # work with s = alpha Z / V; root of mean(phi / (s + (1 - alpha) phi)) = 1
    b = 1.0 - alpha_value
    positive = phi[phi > 0]

    def excess(log_s):
        with np.errstate(divide="ignore", over="ignore"):
            # subnormal phi can make the denominator underflow to 0
            terms = positive / (np.exp(log_s) + b * positive)
        return np.sum(np.where(np.isfinite(terms), terms, 1.0 / b)) / phi.size - 1.0

    # excess -> (frac / b - 1) > 0 as s -> 0 when every point is positive
    top = np.log(positive.max() * positive.size)
    low = np.log(positive.min()) - 40.0
    if excess(low) <= 0:
        # too many exact zeros: the uniform-side mass is all there is
        return float(volume * phi.mean())
    log_s = brentq(excess, low, top, xtol=1e-14, rtol=1e-13, maxiter=500)
    return float(np.exp(log_s) * volume / alpha_value)


def sample_integration_points(component_fn, box: DomainBox, t: int,
                              schedule: AnnealSchedule, m: int,
                              config: ProposalConfig, rng, mode: str = IMPORTANCE,
                              normalizer: float | None = None,
                              batch_fn=None, chain_fn=None,
                              alpha_floor: float = 0.0) -> IntegrationBatch:
    """Draw ``m`` points from the annealed uniform / component mixture.

    Each point comes from the uniform distribution on ``box`` with probability
    ``max(alpha(t), alpha_floor)`` and from a Metropolis-Hastings chain on
    ``component_fn`` otherwise.  The chain starts at a uniform point of the
    box.

    In importance-weighted mode the mixture density at every point is
    recorded.  It needs the integral of ``component_fn``; a known value may
    be passed as ``normalizer``, otherwise it is solved self-consistently
    from the batch (see :func:`mixture_normalizer`).

    ``batch_fn`` is an optional vectorized version of ``component_fn`` used
    to evaluate the sampling density; it must agree with ``component_fn``.
    ``chain_fn(start, count, rng)`` optionally replaces
    :func:`metropolis_hastings` with an equivalent faster chain.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if mode not in MODES:
        raise ValueError(f"unknown estimator mode {mode!r}")
    if not 0.0 <= alpha_floor <= 1.0:
        raise ValueError("alpha_floor must lie in [0, 1]")
    if normalizer is not None and not normalizer > 0:
        raise DegenerateSamplerError(f"normalizer must be positive, got {normalizer}")
    a = max(alpha(t, schedule), alpha_floor)

    from_uniform = rng.random(m) < a
    n_mh = int(m - from_uniform.sum())
    points = np.empty((m, box.d))
    points[from_uniform] = box.uniform(rng, m - n_mh)
    if n_mh:
        start = box.uniform(rng, 1)[0]
        tries = 0
        while component_fn(start) <= 0:
            tries += 1
            if tries > 1000:
                raise ChainStartError("no start point with positive density found")
            start = box.uniform(rng, 1)[0]
        if chain_fn is not None:
            points[~from_uniform] = chain_fn(start, n_mh, rng)
        else:
            points[~from_uniform] = metropolis_hastings(
                component_fn, start, config, n_mh, rng, box=box)

    sample_pdf = None
    if mode == IMPORTANCE:
        uniform_pdf = 1.0 / box.volume
        if a >= 1.0:
            sample_pdf = np.full(m, uniform_pdf)
        else:
            if batch_fn is not None:
                phi = np.asarray(batch_fn(points), dtype=float)
            else:
                phi = np.array([component_fn(p) for p in points])
            if normalizer is None:
                normalizer = mixture_normalizer(phi, a, box.volume)
            sample_pdf = a * uniform_pdf + (1.0 - a) * phi / normalizer
    return IntegrationBatch(points, mode, sample_pdf, from_uniform, a)


def estimate_integral(values, batch: IntegrationBatch, box: DomainBox):
    """Monte Carlo estimate of the integral of ``values`` over ``box``.

    ``values`` has length ``m``, or shape ``(m, P)`` to estimate ``P``
    integrals at once (e.g. the integral of every parameter gradient).

    Volume-mean mode returns ``V(S) / m * sum(values)``; importance-weighted
    mode returns ``mean(values / sample_pdf)``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != batch.m:
        raise ValueError(f"expected {batch.m} values, got {values.shape[0]}")
    if batch.mode == VOLUME_MEAN:
        out = box.volume * values.mean(axis=0)
        return float(out) if values.ndim == 1 else out
    q = batch.sample_pdf_values
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise DegenerateSamplerError("sampling density is not positive at every point")
    w = 1.0 / q
    if values.ndim == 1:
        return float(np.mean(values * w))
    return np.mean(values * w[:, None], axis=0)
