"""Independent reference computations shared by the test modules."""

import math

import mpmath
import numpy as np

from dnmm.integration import VOLUME_MEAN


def hand_forward(net, x, params=None, exp=math.exp):
    """Scalar re-implementation: loops over units, no numpy."""
    params = net.params if params is None else params
    h = list(x) if isinstance(x, list) else [float(v) for v in np.atleast_1d(x)]
    for sl in net._slices:
        w = params[sl.weight]
        b = params[sl.bias]
        lam = 1.0 if sl.amplitude is None else params[sl.amplitude][0]
        h = [lam / (1 + exp(-(sum(w[o * sl.n_in + i] * h[i] for i in range(sl.n_in)) + b[o])))
             for o in range(sl.n_out)]
    return h[0]


def mp_vector(values):
    return np.array([mpmath.mpf(float(v)) for v in np.ravel(values)], dtype=object)


def frozen_batch_loss(model, x, batch, box, rho, params, gammas):
    """Per-pattern criterion with every normalizer re-estimated from a frozen batch.

    ``params`` holds one mpmath parameter vector per component; the batch
    points and sampling densities stay fixed, so the criterion is a smooth
    function of the parameters alone.
    """
    xs = list(mp_vector(x))
    pts = [list(mp_vector(p)) for p in batch.points]
    s = [1 / (1 + mpmath.exp(-g)) for g in gammas]
    total = sum(s)
    density, penalty = 0, 0
    for k, net in enumerate(model.components):
        vals = [hand_forward(net, p, params[k], mpmath.exp) for p in pts]
        if batch.mode == VOLUME_MEAN:
            z = mpmath.mpf(float(box.volume)) * sum(vals) / len(vals)
        else:
            z = sum(v / mpmath.mpf(float(q)) for v, q in zip(vals, batch.sample_pdf_values)) / len(vals)
        density += (s[k] / total) * hand_forward(net, xs, params[k], mpmath.exp) / z
        penalty += (1 - z) ** 2 / 2
    return density - rho * penalty


def frozen_batch_gradients(model, x, batch, box, rho, step=1e-15, dps=40):
    """Central differences of :func:`frozen_batch_loss` in every gamma and parameter."""
    with mpmath.workdps(dps):
        params = [mp_vector(net.params) for net in model.components]
        gammas = list(mp_vector(model.gammas))

        def loss(p, g):
            return frozen_batch_loss(model, x, batch, box, rho, p, g)

        dgamma = np.empty(model.K)
        for k in range(model.K):
            up, down = list(gammas), list(gammas)
            up[k] += step
            down[k] -= step
            dgamma[k] = float((loss(params, up) - loss(params, down)) / (2 * step))
        dparams = []
        for k in range(model.K):
            out = np.empty(len(params[k]))
            for i in range(len(params[k])):
                up = [p.copy() for p in params]
                down = [p.copy() for p in params]
                up[k][i] += step
                down[k][i] -= step
                out[i] = float((loss(up, gammas) - loss(down, gammas)) / (2 * step))
            dparams.append(out)
    return dgamma, dparams


def simpson_1d(f, a, b, nodes=2001):
    """Composite Simpson rule written out from its weights."""
    x = np.linspace(a, b, nodes)
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (nodes - 1) / 3.0 * np.sum(w * f(x)))
