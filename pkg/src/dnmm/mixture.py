"""Deep neural mixture models and their constrained maximum-likelihood training.

A model is a convex combination of ``K`` component densities, each the output
of a :class:`~dnmm.network.DeepNet` divided by its integral over the domain
box.  Mixing coefficients are a normalized sigmoid of unconstrained latent
values ``gamma`` so that they stay on the simplex under any update.

Training maximizes, pattern by pattern,

    C(W, x_j) = p(x_j | W) - rho * sum_k (1 - Z_k)^2 / 2

by stochastic gradient ascent.  The integrals ``Z_k`` and the integrals of
every parameter gradient are estimated once per epoch (or once per refresh
period) by Monte Carlo over the box and held fixed between refreshes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .integration import (IMPORTANCE, MODES, AnnealSchedule, ChainStartError,
                          DegenerateSamplerError, DomainBox, IntegrationBatch,
                          ProposalConfig, draw_chain_randomness, estimate_integral,
                          sample_integration_points)
from .network import DeepNet

logger = logging.getLogger(__name__)

FORMAT_VERSION = "dnmm-model/1"
NORMALIZER_FLOOR = 1e-8
DEGENERATE_PATIENCE = 3
LOG_FLOOR = 1e-300

LIKELIHOOD = "likelihood"
LOG_LIKELIHOOD = "log-likelihood"
OBJECTIVES = (LIKELIHOOD, LOG_LIKELIHOOD)

SELF_CONSISTENT = "self-consistent"
PREVIOUS_EPOCH = "previous-epoch"
SAMPLER_NORMALIZERS = (SELF_CONSISTENT, PREVIOUS_EPOCH)


class DegenerateComponentError(ArithmeticError):
    """A component integral fell below ``NORMALIZER_FLOOR``."""

    def __init__(self, component: int, normalizer: float, epoch: int | None = None):
        self.component = component
        self.normalizer = normalizer
        self.epoch = epoch
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(
            f"component {component} is degenerate{where}: "
            f"integral {normalizer:.3g} below {NORMALIZER_FLOOR:g}")


class TrainingFailure(RuntimeError):
    """Training stopped because a component stayed degenerate."""

    def __init__(self, component: int, epoch: int):
        self.component = component
        self.epoch = epoch
        super().__init__(
            f"component {component} degenerate for {DEGENERATE_PATIENCE} "
            f"consecutive epochs (epoch {epoch})")


def mixing_coefficients(gammas) -> np.ndarray:
    """``c_k = sigmoid(gamma_k) / sum_l sigmoid(gamma_l)``."""
    s = expit(np.asarray(gammas, dtype=float))
    return s / s.sum()


@dataclass
class ComponentIntegrals:
    """Estimated integral of a component and of each of its parameter gradients."""

    normalizer: float
    gradient: np.ndarray


def integrate_component(net: DeepNet, batch: IntegrationBatch,
                        box: DomainBox) -> ComponentIntegrals:
    """One forward/backward sweep over the batch yields every integral at once."""
    values, grads = net.value_and_gradient(batch.points)
    z = float(estimate_integral(values, batch, box))
    g = np.asarray(estimate_integral(grads, batch, box))
    return ComponentIntegrals(z, g)


class Dnmm:
    """Mixture of ``K`` neural component densities on a box.

    Parameters
    ----------
    components : list of DeepNet
        Component networks sharing the input dimension of ``domain``.
    domain : DomainBox
        The support ``S`` of the model.
    gammas : array_like, optional
        Latent mixing values; zeros (uniform mixing) by default.
    normalizers : array_like, optional
        Cached component integrals.  Unset until estimated.
    """

    def __init__(self, components, domain: DomainBox, gammas=None, normalizers=None):
        if not components:
            raise ValueError("a mixture needs at least one component")
        for net in components:
            if net.input_dim != domain.d:
                raise ValueError(
                    f"component input dimension {net.input_dim} does not match "
                    f"domain dimension {domain.d}")
        self.components = list(components)
        self.domain = domain
        k = len(self.components)
        self.gammas = np.zeros(k) if gammas is None else np.array(gammas, dtype=float)
        if self.gammas.shape != (k,):
            raise ValueError("need one gamma per component")
        if normalizers is None:
            self.normalizers = np.full(k, np.nan)
        else:
            self.normalizers = np.array(normalizers, dtype=float)
            if self.normalizers.shape != (k,):
                raise ValueError("need one normalizer per component")

    @classmethod
    def initialize(cls, K: int, hidden, domain: DomainBox, rng, half_width=0.5,
                   activations=None) -> "Dnmm":
        """``K`` randomly initialized networks with hidden widths ``hidden``."""
        sizes = (domain.d, *tuple(hidden), 1)
        nets = [DeepNet.initialize(sizes, rng, half_width, activations) for _ in range(K)]
        return cls(nets, domain)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.domain.d

    def copy(self) -> "Dnmm":
        return Dnmm([n.copy() for n in self.components], self.domain,
                    self.gammas.copy(), self.normalizers.copy())

    def mixing_coefficients(self) -> np.ndarray:
        return mixing_coefficients(self.gammas)

    def _check_normalizer(self, k: int) -> float:
        z = self.normalizers[k]
        if not z >= NORMALIZER_FLOOR:  # also catches nan
            raise DegenerateComponentError(k, float(z))
        return float(z)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        xb = x.reshape(1, -1) if single else x
        if xb.shape[-1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got {x.shape}")
        return xb, single

    def component_density(self, k: int, x):
        """``phi_k(x) / Z_k``, zero outside the domain box."""
        z = self._check_normalizer(k)
        xb, single = self._points(x)
        out = self.components[k].forward(xb) / z
        out = np.where(self.domain.contains(xb), out, 0.0)
        return float(out[0]) if single else out

    def component_densities(self, x) -> np.ndarray:
        """``(N, K)`` matrix of component densities."""
        xb, _ = self._points(x)
        return np.column_stack([self.component_density(k, xb) for k in range(self.K)])

    def density(self, x):
        """Mixture density at one point (float) or an ``(N, d)`` batch."""
        xb, single = self._points(x)
        out = self.component_densities(xb) @ self.mixing_coefficients()
        return float(out[0]) if single else out

    __call__ = density

    def penalty(self, rho: float) -> float:
        return float(rho * 0.5 * np.sum((1.0 - self.normalizers) ** 2))

    def loss(self, x, rho: float) -> float:
        """Per-pattern criterion: mixture density minus the integral penalty."""
        return self.density(x) - self.penalty(rho)

    # -- gradient-ascent steps ------------------------------------------

    def gamma_update(self, x, eta: float, pk=None) -> np.ndarray:
        """Deltas for the latent mixing values at pattern ``x``.

        ``pk`` (the component densities at ``x``) may be supplied to avoid
        recomputing them.
        """
        if pk is None:
            pk = self.component_densities(x)[0]
        s = expit(self.gammas)
        p = mixing_coefficients(self.gammas) @ pk
        return eta * (s * (1.0 - s) / s.sum()) * (pk - p)

    def component_param_update(self, k: int, x, integrals: ComponentIntegrals,
                               eta: float, rho: float, value_grad=None) -> np.ndarray:
        """Deltas for every parameter of component ``k`` at pattern ``x``.

        Uses the cached ``Z_k`` and the batch estimate of the gradient
        integrals in ``integrals``.  ``value_grad`` optionally carries
        ``(phi_k(x), dphi_k(x)/dw)`` already computed by the caller.
        """
        z = self._check_normalizer(k)
        if value_grad is None:
            value_grad = self.components[k].value_and_gradient(np.asarray(x, dtype=float))
        phi, dphi = value_grad
        c = self.mixing_coefficients()[k]
        g = integrals.gradient
        likelihood_term = (c / z) * (dphi - (phi / z) * g)
        penalty_term = rho * (1.0 - z) * g
        return eta * (likelihood_term + penalty_term)

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "K": self.K,
            "gammas": self.gammas.tolist(),
            "normalizers": self.normalizers.tolist(),
            "domain": self.domain.to_dict(),
            "components": [n.to_dict() for n in self.components],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Dnmm":
        if doc.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        nets = [DeepNet.from_dict(n) for n in doc["components"]]
        return cls(nets, DomainBox.from_dict(doc["domain"]), doc["gammas"],
                   doc["normalizers"])


def component_density(model: Dnmm, k: int, x):
    return model.component_density(k, x)


def mixture_density(model: Dnmm, x):
    return model.density(x)


def loss(model: Dnmm, x, rho: float) -> float:
    return model.loss(x, rho)


def gamma_update(model: Dnmm, x, eta: float) -> np.ndarray:
    return model.gamma_update(x, eta)


def component_param_update(model: Dnmm, k: int, x, integrals: ComponentIntegrals,
                           eta: float, rho: float) -> np.ndarray:
    return model.component_param_update(k, x, integrals, eta, rho)


@dataclass
class TrainConfig:
    """Hyperparameters of the training loop.

    ``refresh_period`` is the number of patterns between integral refreshes;
    ``None`` refreshes once per epoch.  ``lr_decay`` multiplies ``eta`` after
    every epoch (1.0 keeps it constant).

    ``objective`` selects the data term: ``"likelihood"`` ascends the mixture
    density itself, ``"log-likelihood"`` its logarithm (every data-term step
    is divided by the current mixture density at the pattern).  ``compiled``
    switches between the numba inner loops and the plain numpy reference;
    both give the same result up to floating-point rounding.

    ``alpha_floor`` keeps a minimum share of uniform integration points.
    ``sampler_normalizer`` chooses how the sampling density is normalized:
    solved from the current batch (``"self-consistent"``) or taken from the
    previous epoch's estimate (``"previous-epoch"``).
    """

    eta: float = 1e-3
    rho: float = 1e-2
    epochs: int = 100
    m: int = 400
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    mode: str = IMPORTANCE
    seed: int = 0
    refresh_period: int | None = None
    lr_decay: float = 1.0
    final_refresh: bool = True
    objective: str = LIKELIHOOD
    compiled: bool = True
    alpha_floor: float = 0.0
    sampler_normalizer: str = SELF_CONSISTENT

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.sampler_normalizer not in SAMPLER_NORMALIZERS:
            raise ValueError(f"unknown sampler normalizer {self.sampler_normalizer!r}")
        if not 0.0 <= self.alpha_floor <= 1.0:
            raise ValueError("alpha_floor must lie in [0, 1]")
        if not self.lr_decay > 0:
            raise ValueError("lr_decay must be positive")
        if self.refresh_period is not None and self.refresh_period < 1:
            raise ValueError("refresh_period must be positive")
        if self.anneal.total_epochs != self.epochs:
            self.anneal = AnnealSchedule(self.anneal.theta, self.epochs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        doc["anneal"] = AnnealSchedule(**doc.get("anneal", {}))
        doc["proposal"] = ProposalConfig(**doc.get("proposal", {}))
        return cls(**doc)


@dataclass
class TrainTrace:
    """Per-epoch record: mean training log-likelihood, normalizers, mixing."""

    epochs: list = field(default_factory=list)
    log_likelihood: list = field(default_factory=list)
    normalizers: list = field(default_factory=list)
    mixing: list = field(default_factory=list)
    floored: list = field(default_factory=list)

    def record(self, epoch, ll, z, c, floored):
        self.epochs.append(epoch)
        self.log_likelihood.append(float(ll))
        self.normalizers.append([float(v) for v in z])
        self.mixing.append([float(v) for v in c])
        self.floored.append(bool(floored))

    def to_csv(self) -> str:
        K = len(self.normalizers[0]) if self.normalizers else 0
        head = (["epoch", "mean_log_likelihood"] + [f"Z_{k + 1}" for k in range(K)]
                + [f"c_{k + 1}" for k in range(K)])
        lines = [",".join(head)]
        for e, ll, z, c in zip(self.epochs, self.log_likelihood,
                               self.normalizers, self.mixing):
            lines.append(",".join([str(e), repr(ll)] + [repr(v) for v in z]
                                  + [repr(v) for v in c]))
        return "\n".join(lines) + "\n"


def _mean_log_likelihood(model: Dnmm, data: np.ndarray) -> tuple[float, bool]:
    p = model.density(data)
    floored = bool(np.any(p < LOG_FLOOR))
    return float(np.mean(np.log(np.maximum(p, LOG_FLOOR)))), floored


def train(model: Dnmm, data, config: TrainConfig, callback=None):
    """Train ``model`` in place by per-pattern gradient ascent.

    Every epoch draws a fresh integration batch per component, re-estimates
    the component integrals and gradient integrals from it, then visits the
    training patterns in a seeded random order.  For each pattern the latent
    mixing values and every component's parameters are updated together from
    the same pre-update state.

    Parameters
    ----------
    model : Dnmm
        Model to train; modified in place.
    data : array_like of shape (n, d)
        Training sample, all inside ``model.domain``.
    config : TrainConfig
    callback : callable, optional
        Called as ``callback(epoch, model)`` after every epoch.

    Returns
    -------
    (model, TrainTrace)

    Raises
    ------
    ValueError
        Empty data or data outside the domain.
    TrainingFailure
        A component integral stayed below the floor for three epochs.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1 and model.d == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("training data must be a nonempty (n, d) array")
    if data.shape[1] != model.d:
        raise ValueError(f"data dimension {data.shape[1]} != model dimension {model.d}")
    outside = ~model.domain.contains(data)
    if np.any(outside):
        raise ValueError(f"{int(outside.sum())} training points lie outside the domain")

    K = model.K
    n = len(data)
    seeds = np.random.SeedSequence(config.seed).spawn(K + 1)
    order_rng = np.random.default_rng(seeds[0])
    sampler_rngs = [np.random.default_rng(s) for s in seeds[1:]]
    period = config.refresh_period or n
    box = model.domain
    trace = TrainTrace()
    strikes = np.zeros(K, dtype=int)
    healthy = np.ones(K, dtype=bool)
    fast = _FastPath(model, config) if config.compiled else None

    def refresh(t):
        integrals = []
        for k, net in enumerate(model.components):
            forward = fast.forward(k) if fast else net.forward
            known = None
            if config.sampler_normalizer == PREVIOUS_EPOCH and t > 1 and healthy[k]:
                known = float(model.normalizers[k])
            try:
                batch = sample_integration_points(
                    forward, box, t, config.anneal, config.m, config.proposal,
                    sampler_rngs[k], mode=config.mode, normalizer=known,
                    batch_fn=forward, chain_fn=fast.chain(k) if fast else None,
                    alpha_floor=config.alpha_floor)
                ints = integrate_component(net, batch, box)
            except (ChainStartError, DegenerateSamplerError):
                # the component vanished numerically on the whole box
                ints = ComponentIntegrals(0.0, np.zeros(net.n_params))
            integrals.append(ints)
            healthy[k] = ints.normalizer >= NORMALIZER_FLOOR
            model.normalizers[k] = ints.normalizer if healthy[k] else NORMALIZER_FLOOR
        return integrals

    eta = config.eta
    for t in range(1, config.epochs + 1):
        order = order_rng.permutation(n)
        epoch_sick = np.zeros(K, dtype=bool)
        for start in range(0, n, period):
            integrals = refresh(t)
            epoch_sick |= ~healthy
            chunk = order[start:start + period]
            if fast:
                fast.run(chunk, data, integrals, healthy, eta)
            else:
                _pattern_updates(model, data, chunk, integrals, healthy, eta, config)
        strikes = np.where(epoch_sick, strikes + 1, 0)
        if np.any(strikes >= DEGENERATE_PATIENCE):
            raise TrainingFailure(int(np.argmax(strikes >= DEGENERATE_PATIENCE)), t)

        ll, floored = _mean_log_likelihood(model, data) if healthy.all() else (-np.inf, True)
        trace.record(t, ll, model.normalizers, model.mixing_coefficients(), floored)
        logger.debug("epoch %d: mean log-likelihood %.5g, Z=%s", t, ll,
                     np.array2string(model.normalizers, precision=3))
        if callback is not None:
            callback(t, model)
        eta *= config.lr_decay

    if config.final_refresh:
        refresh(config.epochs)
        if not healthy.all():
            raise TrainingFailure(int(np.argmin(healthy)), config.epochs)
    return model, trace


def _pattern_updates(model: Dnmm, data, chunk, integrals, healthy, eta, config):
    """Numpy reference for the per-pattern steps of one refresh period."""
    K = model.K
    z = model.normalizers.copy()
    for j in chunk:
        vg = [net.value_and_gradient(data[j]) for net in model.components]
        phi = np.array([v for v, _ in vg])
        pk = np.where(healthy, phi / z, 0.0)
        c = model.mixing_coefficients()
        s = expit(model.gammas)
        p = c @ pk
        scale = 1.0 / max(p, LOG_FLOOR) if config.objective == LOG_LIKELIHOOD else 1.0
        dgamma = eta * scale * (s * (1.0 - s) / s.sum()) * (pk - p)
        deltas = []
        for k in range(K):
            g = integrals[k].gradient
            step = config.rho * (1.0 - z[k]) * g
            if healthy[k]:
                step = step + scale * (c[k] / z[k]) * (vg[k][1] - pk[k] * g)
            deltas.append(eta * step)
        model.gammas += dgamma
        for net, delta in zip(model.components, deltas):
            net.params += delta
            net.project()


class _FastPath:
    """Compiled counterparts of the training inner loops.

    Component parameters are mirrored in a ``(K, n_params)`` stack that the
    kernels update in place; the networks share views into it, so the model
    always reflects the current state.
    """

    def __init__(self, model: Dnmm, config: TrainConfig):
        from . import _kernels

        self.k = _kernels
        sizes = {(n.layer_sizes, n.activations) for n in model.components}
        if len(sizes) != 1:
            raise ValueError("the compiled path needs identical component architectures")
        self.model = model
        self.config = config
        self.layout = _kernels.layout_of(model.components[0])
        self.P = np.stack([n.params for n in model.components])
        for k, net in enumerate(model.components):
            net.params = self.P[k]
        self.ws = _kernels.workspace(self.layout)
        self.lo = model.domain.lo.astype(float)
        self.hi = model.domain.hi.astype(float)
        self.objective = (_kernels.OBJ_LOG_LIKELIHOOD if config.objective == LOG_LIKELIHOOD
                          else _kernels.OBJ_LIKELIHOOD)

    def forward(self, k):
        hs, sig = self.ws[0], self.ws[1]

        def fn(x):
            x = np.asarray(x, dtype=float)
            if x.ndim <= 1:
                return float(self.k.forward_batch(self.P[k], self.layout,
                                                  x.reshape(1, -1), hs, sig)[0])
            return self.k.forward_batch(self.P[k], self.layout, x, hs, sig)
        return fn

    def chain(self, k):
        cfg = self.config.proposal

        def fn(start, count, rng):
            steps, accept_u = draw_chain_randomness(cfg, count, len(start), rng)
            out, _ = self.k.mh_chain(self.P[k], self.layout, np.asarray(start, float),
                                     steps, accept_u, self.lo, self.hi, cfg.burn_in,
                                     self.ws[0], self.ws[1])
            return out
        return fn

    def run(self, chunk, data, integrals, healthy, eta):
        G = np.stack([ig.gradient for ig in integrals])
        self.k.pattern_updates(self.P, self.layout, self.model.gammas, data,
                               np.asarray(chunk, dtype=np.int64),
                               self.model.normalizers.copy(), G, healthy.copy(),
                               float(eta), float(self.config.rho), self.objective,
                               *self.ws)


def save_model(model: Dnmm, path, extra: dict | None = None) -> None:
    doc = model.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path) -> tuple[Dnmm, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return Dnmm.from_dict(doc), doc
