"""Independent reference implementations used as test oracles.

Everything here is plain numpy (or pure Python) written directly from the
model definitions, sharing no code with the package beyond parameter names.
"""

from fractions import Fraction
from itertools import product

import numpy as np


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def mlp(params, prefix, x):
    """Affine layers with tanh between them, found by probing parameter names."""
    x = np.atleast_2d(x)
    n = 0
    while f"{prefix}.W{n}" in params:
        n += 1
    for i in range(n):
        x = x @ params[f"{prefix}.W{i}"] + params[f"{prefix}.b{i}"]
        if i < n - 1:
            x = np.tanh(x)
    return x


def lstm(params, prefix, x, h, c):
    """LSTM with the four gates kept as separate column blocks (i, f, o, g)."""
    W, b = params[f"{prefix}.W"], params[f"{prefix}.b"]
    hid = h.shape[-1]
    n_in = x.shape[-1]
    Wx, Wh = W[:n_in], W[n_in:]
    gate = lambda k: x @ Wx[:, k * hid : (k + 1) * hid] + h @ Wh[:, k * hid : (k + 1) * hid] + b[k * hid : (k + 1) * hid]
    i, f, o, g = sigmoid(gate(0)), sigmoid(gate(1)), sigmoid(gate(2)), np.tanh(gate(3))
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def tdlgm_step(params, layers, states, xi):
    """Top-down pass; states/xi bottom-up lists of arrays. Returns (v_mean, new_states, h)."""
    h = [None] * layers
    new = [None] * (layers - 1)
    h[layers - 1] = xi[layers - 1] @ params[f"gen.G{layers}"]
    for l in range(layers - 1, 0, -1):
        hid, cell = lstm(params, f"gen.R{l}", h[l], *states[l - 1])
        new[l - 1] = (hid, cell)
        h[l - 1] = hid + xi[l - 1] @ params[f"gen.G{l}"]
    return mlp(params, "gen.T0", h[0]), new, h


def dlgm_forward(params, layers, xi, history):
    h = xi[layers - 1] @ params[f"gen.G{layers}"]
    for l in range(layers - 1, 0, -1):
        h = mlp(params, f"gen.T{l}", h) + xi[l - 1] @ params[f"gen.G{l}"]
    if history.shape[1]:
        h = np.hstack([h, history])
    return mlp(params, "gen.T0", h)


def state_recognition(params, layers, hidden, window):
    out = []
    for l in range(1, layers):
        z = mlp(params, f"srec{l}", window)
        out.append((np.tanh(z[:, :hidden]), z[:, hidden:]))
    return out


def softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def latent_posterior(params, layers, latent, v):
    z = np.atleast_2d(np.asarray(v, dtype=float).reshape(-1, 1)) @ params["qrec.W0"] + params["qrec.b0"]
    out = []
    for l in range(layers):
        mu = z[:, 2 * latent * l : 2 * latent * l + latent]
        raw = z[:, 2 * latent * l + latent : 2 * latent * (l + 1)]
        out.append((mu, softplus(raw) + 1e-6))
    return out


def mc_kl_standard(mu, cov, n, rng):
    """Monte-Carlo ``E_q[log q(x) - log p(x)]`` for diagonal q and standard normal p.

    Uses antithetic pairs ``mu +/- sqrt(cov) z`` (n draws in total) to cut
    the estimator's variance.
    """
    mu = np.asarray(mu, dtype=float)
    cov = np.asarray(cov, dtype=float)
    z = rng.standard_normal((n // 2, mu.size))
    z = np.vstack([z, -z])
    x = mu + np.sqrt(cov) * z
    log_q = -0.5 * np.sum((x - mu) ** 2 / cov + np.log(2 * np.pi * cov), axis=1)
    log_p = -0.5 * np.sum(x**2 + np.log(2 * np.pi), axis=1)
    return float(np.mean(log_q - log_p))


def brute_force_score(true_symbols, gen_symbols, step, buckets):
    """Overlap score, enumerating every cell and counting pairs by hand.

    Normalized by the number of nonzero true cells and scaled to [0, 100].
    """
    T = [int(x) for x in true_symbols]
    G = [int(x) for x in gen_symbols]

    def count(seq, i, j):
        return sum(1 for k in range(len(seq) - step) if seq[k] == i and seq[k + step] == j)

    ratio = Fraction(len(T), len(G))
    total = Fraction(0)
    cells = 0
    for i, j in product(range(buckets), repeat=2):
        tm = count(T, i, j)
        if tm == 0:
            continue
        gm = ratio * count(G, i, j)
        total += min(gm, Fraction(tm)) / tm
        cells += 1
    return float(100 * total / cells)


def central_difference(f, x, eps=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.reshape(-1)[i] += eps
        xm.reshape(-1)[i] -= eps
        g.reshape(-1)[i] = (f(xp) - f(xm)) / (2 * eps)
    return g
