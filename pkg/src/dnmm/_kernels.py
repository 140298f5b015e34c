"""Compiled inner loops for training: per-pattern updates and M-H chains.

These mirror :class:`dnmm.network.DeepNet` exactly (same flat parameter
layout) and are cross-checked against it in the test suite.  A network is
described by ``layout``, an ``(L, 5)`` int array with rows
``(n_in, n_out, weight_offset, bias_offset, amplitude_offset)``; the
amplitude offset is -1 for plain logistic layers.
"""

import math

import numpy as np
from numba import njit

OBJ_LIKELIHOOD = 0
OBJ_LOG_LIKELIHOOD = 1


def layout_of(net) -> np.ndarray:
    rows = []
    for sl in net._slices:
        lam = -1 if sl.amplitude is None else sl.amplitude.start
        rows.append((sl.n_in, sl.n_out, sl.weight.start, sl.bias.start, lam))
    return np.array(rows, dtype=np.int64)


@njit(cache=True)
def _sigmoid(a):
    if a >= 0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


@njit(cache=True)
def _forward(params, layout, x, hs, sig):
    """Fill ``hs[l]`` / ``sig[l]`` and return the scalar output."""
    L = layout.shape[0]
    for i in range(layout[0, 0]):
        hs[0, i] = x[i]
    for l in range(L):
        n_in = layout[l, 0]
        n_out = layout[l, 1]
        w0 = layout[l, 2]
        b0 = layout[l, 3]
        lam = 1.0 if layout[l, 4] < 0 else params[layout[l, 4]]
        for o in range(n_out):
            a = params[b0 + o]
            row = w0 + o * n_in
            for i in range(n_in):
                a += params[row + i] * hs[l, i]
            s = _sigmoid(a)
            sig[l, o] = s
            hs[l + 1, o] = lam * s
    return hs[L, 0]


@njit(cache=True)
def _value_grad(params, layout, x, hs, sig, up, delta, grad):
    out = _forward(params, layout, x, hs, sig)
    L = layout.shape[0]
    up[0] = 1.0
    for l in range(L - 1, -1, -1):
        n_in = layout[l, 0]
        n_out = layout[l, 1]
        w0 = layout[l, 2]
        b0 = layout[l, 3]
        lam_off = layout[l, 4]
        lam = 1.0 if lam_off < 0 else params[lam_off]
        acc = 0.0
        for o in range(n_out):
            s = sig[l, o]
            acc += up[o] * s
            delta[o] = up[o] * lam * s * (1.0 - s)
            grad[b0 + o] = delta[o]
            row = w0 + o * n_in
            for i in range(n_in):
                grad[row + i] = delta[o] * hs[l, i]
        if lam_off >= 0:
            grad[lam_off] = acc
        if l > 0:
            for i in range(n_in):
                v = 0.0
                for o in range(n_out):
                    v += delta[o] * params[w0 + o * n_in + i]
                up[i] = v
    return out


def workspace(layout):
    width = int(max(layout[:, 0].max(), layout[:, 1].max()))
    L = layout.shape[0]
    return (np.zeros((L + 1, width)), np.zeros((L, width)),
            np.zeros(width), np.zeros(width))


@njit(cache=True)
def forward_batch(params, layout, X, hs, sig):
    out = np.empty(X.shape[0])
    for n in range(X.shape[0]):
        out[n] = _forward(params, layout, X[n], hs, sig)
    return out


@njit(cache=True)
def mh_chain(params, layout, start, steps, accept_u, lo, hi, burn_in, hs, sig):
    """Random-walk Metropolis-Hastings on the network output inside ``[lo, hi]``.

    ``steps`` holds the pre-drawn proposal offsets, ``accept_u`` the uniforms
    for the acceptance test; both have one row per chain step.
    """
    total, d = steps.shape
    count = total - burn_in
    out = np.empty((count, d))
    x = start.copy()
    cand = np.empty(d)
    fx = _forward(params, layout, x, hs, sig)
    accepted = 0
    for t in range(total):
        inside = True
        for i in range(d):
            cand[i] = x[i] + steps[t, i]
            if cand[i] < lo[i] or cand[i] > hi[i]:
                inside = False
        if inside:
            fc = _forward(params, layout, cand, hs, sig)
            if fc >= fx or accept_u[t] * fx < fc:
                for i in range(d):
                    x[i] = cand[i]
                fx = fc
                accepted += 1
        if t >= burn_in:
            for i in range(d):
                out[t - burn_in, i] = x[i]
    return out, accepted


@njit(cache=True)
def pattern_updates(P, layout, gammas, data, order, z, G, healthy, eta, rho,
                    objective, hs, sig, up, delta):
    """Apply per-pattern gradient-ascent steps for every index in ``order``.

    ``P`` is the ``(K, n_params)`` stack of component parameters, updated in
    place together with ``gammas``.  Normalizers ``z`` and gradient
    integrals ``G`` stay fixed.  Every step is computed from the pre-update
    state and then applied to all parameters at once.
    """
    K, n_par = P.shape
    phi = np.empty(K)
    pk = np.empty(K)
    dphi = np.empty((K, n_par))
    L = layout.shape[0]
    for idx in range(order.shape[0]):
        x = data[order[idx]]
        for k in range(K):
            phi[k] = _value_grad(P[k], layout, x, hs, sig, up, delta, dphi[k])
            pk[k] = phi[k] / z[k] if healthy[k] else 0.0
        ssum = 0.0
        for k in range(K):
            ssum += _sigmoid(gammas[k])
        p = 0.0
        for k in range(K):
            p += _sigmoid(gammas[k]) / ssum * pk[k]
        scale = 1.0
        if objective == OBJ_LOG_LIKELIHOOD:
            scale = 1.0 / max(p, 1e-300)
        for k in range(K):
            s = _sigmoid(gammas[k])
            c = s / ssum
            a = scale * c / z[k] if healthy[k] else 0.0
            b = pk[k]
            for w in range(n_par):
                P[k, w] += eta * (a * (dphi[k, w] - b * G[k, w]) + rho * (1.0 - z[k]) * G[k, w])
            # keep amplitudes positive
            for l in range(L):
                if layout[l, 4] >= 0 and P[k, layout[l, 4]] < 1e-6:
                    P[k, layout[l, 4]] = 1e-6
        # gamma deltas use the pre-update gammas
        for k in range(K):
            s = _sigmoid(gammas[k])
            pk[k] = eta * scale * s * (1.0 - s) / ssum * (pk[k] - p)
        for k in range(K):
            gammas[k] += pk[k]
