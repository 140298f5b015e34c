"""Feed-forward networks with layer-wise adaptive-amplitude logistic units.

Each layer computes ``h = lam * sigmoid(W @ h_prev + b)``.  The amplitude
``lam`` is a trainable positive scalar shared by the whole layer, so the
output of the last layer lies in ``[0, lam_out)``.

All trainable parameters live in one flat vector.  The canonical ordering is
layer-major and, inside a layer, ``W`` (row-major, shape ``(n_out, n_in)``),
then ``b``, then ``lam`` (absent for plain logistic layers).  Gradients use
exactly the same layout, so ``net.params += eta * grad`` is an update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

FORMAT_VERSION = "dnmm-net/1"

AMP_LOGISTIC = "amp_logistic"
LOGISTIC = "logistic"
ACTIVATIONS = (AMP_LOGISTIC, LOGISTIC)

AMPLITUDE_FLOOR = 1e-6


@dataclass(frozen=True)
class _LayerSlices:
    weight: slice
    bias: slice
    amplitude: slice | None
    n_in: int
    n_out: int


class DeepNet:
    """A fully connected network mapping ``R^d`` to a single nonnegative value.

    Parameters
    ----------
    layer_sizes : sequence of int
        Widths from input to output, e.g. ``(1, 9, 1)``.  The last entry must
        be 1.
    activations : sequence of str, optional
        One of ``"amp_logistic"`` (default) or ``"logistic"`` per non-input
        layer.  Plain logistic layers have a fixed unit amplitude.
    params : array_like, optional
        Flat parameter vector in canonical order.  Zeros with unit amplitudes
        when omitted; see :meth:`initialize` for random initialization.
    """

    def __init__(self, layer_sizes, activations=None, params=None):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] != 1:
            raise ValueError(f"output layer must have width 1, got {sizes[-1]}")
        if activations is None:
            activations = (AMP_LOGISTIC,) * (len(sizes) - 1)
        activations = tuple(activations)
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per non-input layer")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

        self.layer_sizes = sizes
        self.activations = activations
        self._slices = []
        offset = 0
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            w = slice(offset, offset + n_in * n_out)
            offset = w.stop
            b = slice(offset, offset + n_out)
            offset = b.stop
            lam = None
            if act == AMP_LOGISTIC:
                lam = slice(offset, offset + 1)
                offset += 1
            self._slices.append(_LayerSlices(w, b, lam, n_in, n_out))
        self.n_params = offset

        if params is None:
            params = np.zeros(offset)
            for sl in self._slices:
                if sl.amplitude is not None:
                    params[sl.amplitude] = 1.0
        params = np.array(params, dtype=float)
        if params.shape != (offset,):
            raise ValueError(f"expected {offset} parameters, got shape {params.shape}")
        self.params = params
        if np.any(self.amplitudes() <= 0):
            raise ValueError("amplitudes must be positive")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @classmethod
    def initialize(cls, layer_sizes, rng, half_width=0.5, activations=None):
        """Random weights and biases on ``[-hw, hw] / sqrt(fan_in)``, amplitudes 1."""
        net = cls(layer_sizes, activations)
        for sl in net._slices:
            scale = half_width / np.sqrt(sl.n_in)
            net.params[sl.weight] = rng.uniform(-scale, scale, sl.n_in * sl.n_out)
            net.params[sl.bias] = rng.uniform(-scale, scale, sl.n_out)
        return net

    def copy(self) -> "DeepNet":
        return DeepNet(self.layer_sizes, self.activations, self.params.copy())

    # -- parameter views ------------------------------------------------

    def weight(self, layer: int) -> np.ndarray:
        sl = self._slices[layer]
        return self.params[sl.weight].reshape(sl.n_out, sl.n_in)

    def bias(self, layer: int) -> np.ndarray:
        return self.params[self._slices[layer].bias]

    def amplitude(self, layer: int) -> float:
        sl = self._slices[layer].amplitude
        return 1.0 if sl is None else float(self.params[sl][0])

    def amplitudes(self) -> np.ndarray:
        return np.array([self.amplitude(i) for i in range(len(self._slices))])

    def project(self) -> None:
        """Clamp every trainable amplitude to at least ``AMPLITUDE_FLOOR``."""
        for sl in self._slices:
            if sl.amplitude is not None:
                np.maximum(self.params[sl.amplitude], AMPLITUDE_FLOOR,
                           out=self.params[sl.amplitude])

    # -- evaluation -----------------------------------------------------

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            # A 1-D array is one point, except for d = 1 where it may also be
            # read as a batch; callers pass (N, 1) for batches in that case.
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(
                f"input dimension mismatch: network expects d={self.input_dim}, "
                f"got shape {np.shape(x)}")
        return x, single

    def _forward_trace(self, x: np.ndarray):
        hs = [x]
        sig = []
        h = x
        for i, sl in enumerate(self._slices):
            w = self.params[sl.weight].reshape(sl.n_out, sl.n_in)
            s = expit(h @ w.T + self.params[sl.bias])
            sig.append(s)
            h = s * self.amplitude(i) if sl.amplitude is not None else s
            hs.append(h)
        return hs, sig

    def forward(self, x):
        """Network output at one point (returns float) or ``(N, d)`` points."""
        xb, single = self._as_batch(x)
        hs, _ = self._forward_trace(xb)
        out = hs[-1][:, 0]
        return float(out[0]) if single else out

    __call__ = forward

    def _value_and_grad(self, xb: np.ndarray):
        hs, sig = self._forward_trace(xb)
        n = xb.shape[0]
        grad = np.empty((n, self.n_params))
        upstream = np.ones((n, 1))  # d out / d h_L
        for i in range(len(self._slices) - 1, -1, -1):
            sl = self._slices[i]
            s = sig[i]
            if sl.amplitude is not None:
                lam = self.params[sl.amplitude][0]
                grad[:, sl.amplitude] = np.sum(upstream * s, axis=1, keepdims=True)
                delta = upstream * (lam * s * (1.0 - s))
            else:
                delta = upstream * (s * (1.0 - s))
            grad[:, sl.weight] = (delta[:, :, None] * hs[i][:, None, :]).reshape(n, -1)
            grad[:, sl.bias] = delta
            if i > 0:
                upstream = delta @ self.params[sl.weight].reshape(sl.n_out, sl.n_in)
        return hs[-1][:, 0], grad

    def param_gradient(self, x):
        """Exact gradient of the output w.r.t. every parameter.

        Returns a flat vector of length ``n_params`` for a single point, or an
        ``(N, n_params)`` array for a batch.
        """
        xb, single = self._as_batch(x)
        _, grad = self._value_and_grad(xb)
        return grad[0] if single else grad

    def value_and_gradient(self, x):
        """Output and parameter gradient from a single forward/backward pass."""
        xb, single = self._as_batch(x)
        value, grad = self._value_and_grad(xb)
        if single:
            return float(value[0]), grad[0]
        return value, grad

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "activations": list(self.activations),
            "params": self.params.tolist(),
            "amplitudes": self.amplitudes().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DeepNet":
        if doc.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported network format {doc.get('format')!r}")
        return cls(doc["layer_sizes"], doc["activations"], doc["params"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DeepNet":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"DeepNet(layer_sizes={self.layer_sizes}, n_params={self.n_params})"


def forward(net: DeepNet, x) -> float:
    """Functional alias for :meth:`DeepNet.forward`."""
    return net.forward(x)


def param_gradient(net: DeepNet, x) -> np.ndarray:
    """Functional alias for :meth:`DeepNet.param_gradient`."""
    return net.param_gradient(x)


def parameter_count(layer_sizes, activations=None) -> int:
    """Number of trainable parameters of an architecture, without building it."""
    sizes = list(layer_sizes)
    if activations is None:
        activations = [AMP_LOGISTIC] * (len(sizes) - 1)
    return sum(a * b + b + (act == AMP_LOGISTIC)
               for a, b, act in zip(sizes[:-1], sizes[1:], activations))
