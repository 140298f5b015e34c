"""Scores for density estimates: ISE, mean log-likelihood, Welch's t-test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

SIMPSON = "simpson"
MONTE_CARLO = "monte-carlo"
LIKELIHOOD_FLOOR = 1e-300
ISE_PADDING = 0.15


@dataclass(frozen=True)
class IseResult:
    """Integrated squared error with its provenance.

    ``stderr`` is set for Monte Carlo estimates and ``None`` for quadrature.
    """

    value: float
    method: str
    count: int
    stderr: float | None = None

    def __post_init__(self):
        if self.method not in (SIMPSON, MONTE_CARLO):
            raise ValueError(f"unknown ISE method {self.method!r}")
        if not self.value >= 0:
            raise ValueError("ISE must be nonnegative")
        if (self.stderr is not None) != (self.method == MONTE_CARLO):
            raise ValueError("stderr is required for Monte Carlo and absent otherwise")

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "count": self.count,
                "stderr": self.stderr}


def padded_interval(data, padding: float = ISE_PADDING) -> tuple[float, float]:
    """Data range widened by ``padding`` times its width on each side."""
    data = np.asarray(data, dtype=float).ravel()
    lo, hi = float(data.min()), float(data.max())
    pad = padding * (hi - lo)
    return lo - pad, hi + pad


def _column(f, x):
    return np.asarray(f(x[:, None]), dtype=float).reshape(-1)


def ise_simpson_1d(p, q, interval, nodes: int = 2001) -> IseResult:
    """Composite-Simpson estimate of ``integral (p - q)^2`` over ``interval``.

    ``p`` and ``q`` take an ``(N, 1)`` array and return ``N`` values.
    """
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError("Simpson's rule needs an odd node count of at least 3")
    a, b = map(float, interval)
    if not b > a:
        raise ValueError("interval must have positive length")
    x = np.linspace(a, b, nodes)
    sq = (_column(p, x) - _column(q, x)) ** 2
    value = float(integrate.simpson(sq, x=x))
    return IseResult(max(value, 0.0), SIMPSON, nodes)


def ise_mc(p, q, box, samples: int, rng) -> IseResult:
    """``V(S) * mean((p - q)^2)`` at uniform points of ``box``."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    x = box.uniform(rng, samples)
    sq = (np.asarray(p(x), dtype=float).reshape(-1)
          - np.asarray(q(x), dtype=float).reshape(-1)) ** 2
    volume = box.volume
    stderr = volume * float(np.std(sq, ddof=1)) / np.sqrt(samples)
    return IseResult(volume * float(np.mean(sq)), MONTE_CARLO, samples, stderr)


def mean_log_likelihood(density, data, floor: float = LIKELIHOOD_FLOOR
                        ) -> tuple[float, bool]:
    """Mean of ``log(max(density(x), floor))``; the flag reports a floor hit."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if len(data) == 0:
        raise ValueError("data must be nonempty")
    p = np.asarray(density(data), dtype=float).reshape(-1)
    floored = bool(np.any(p < floor))
    return float(np.mean(np.log(np.maximum(p, floor)))), floored


def relative_ise_reduction(baseline: IseResult | float, candidate: IseResult | float) -> float:
    """Percent reduction of the candidate's ISE relative to the baseline's."""
    b = baseline.value if isinstance(baseline, IseResult) else float(baseline)
    c = candidate.value if isinstance(candidate, IseResult) else float(candidate)
    if not b > 0:
        raise ValueError("baseline ISE must be positive")
    return 100.0 * (b - c) / b


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_value: float


def welch_t_test(sample_a, sample_b) -> WelchResult:
    """Two-sided unequal-variance t-test with Welch-Satterthwaite dof."""
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if len(a) < 2 or len(b) < 2:
        raise ValueError("both samples need at least 2 values")
    va, vb = np.var(a, ddof=1) / len(a), np.var(b, ddof=1) / len(b)
    if va <= 0 or vb <= 0:
        raise ValueError("both samples need nonzero variance")
    t = (a.mean() - b.mean()) / np.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return WelchResult(float(t), float(df), float(min(p, 1.0)))
