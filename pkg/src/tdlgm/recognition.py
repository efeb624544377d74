"""Recognition models: latent posterior q(xi | v_t) and state recognizer.

The latent recognizer is a linear head on the scalar observation giving a
diagonal Gaussian per layer. The state recognizer maps the window of the
``m`` values preceding ``t`` to every recurrent layer's (hidden, cell) pair,
one MLP per layer.
"""

from __future__ import annotations

from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ShapeError
from .nn import LayerState, mlp_forward

COV_FLOOR = 1e-6


class GaussianSpec(NamedTuple):
    mu: Node
    diag_cov: Node


def latent_recognize(p: Mapping, config, v) -> list[GaussianSpec]:
    """Per-layer diagonal Gaussians for observations ``v`` (shape (n,) or (n, 1)).

    Covariances are ``softplus(raw) + 1e-6`` and therefore strictly positive.
    """
    p = ad.as_nodes(p)
    if not isinstance(v, Node):
        v = ad.constant(np.asarray(v, dtype=np.float64).reshape(-1, 1))
    out = mlp_forward(p, "qrec", config.qrec_spec, v)
    d = config.latent
    specs = []
    for l in range(config.layers):
        base = 2 * d * l
        mu = out[:, base : base + d]
        cov = ad.softplus(out[:, base + d : base + 2 * d]) + COV_FLOOR
        specs.append(GaussianSpec(mu, cov))
    return specs


def reparam_sample(spec: GaussianSpec, rng: np.random.Generator | None = None, eps=None) -> Node:
    """``mu + sqrt(diag_cov) * eps`` with ``eps`` entering the graph as a constant.

    Pass ``eps`` to freeze the draw; otherwise it comes from ``rng``.
    """
    mu, cov = spec
    if eps is None:
        if rng is None:
            raise ValueError("reparam_sample needs rng or eps")
        eps = rng.standard_normal(mu.shape)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != mu.shape:
        raise ShapeError(f"eps shape {eps.shape} != mu shape {mu.shape}")
    std = ad.exp(ad.scale(ad.log(cov), 0.5))
    return mu + std * ad.constant(eps)


def pad_window(window: Sequence[float], m: int, pad_value: float = 0.5) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    if window.size == 0:
        raise ValueError("empty state-recognition window")
    if window.size > m:
        raise ShapeError(f"window length {window.size} exceeds m={m}")
    return np.concatenate([np.full(m - window.size, pad_value), window])


def causal_windows(series, t_index, m: int, pad_value: float = 0.5) -> np.ndarray:
    """Rows ``series[t-m:t]`` for each ``t`` in ``t_index``, left-padded.

    ``t = 0`` yields a window made entirely of padding.
    """
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    padded = np.concatenate([np.full(m, pad_value), series])
    t_index = np.asarray(t_index, dtype=int).reshape(-1)
    if np.any(t_index < 0) or np.any(t_index > series.size):
        raise IndexError("window end outside the series")
    cols = np.arange(m)
    return padded[t_index[:, None] + cols[None, :]]


def recognize_state(p: Mapping, config, windows) -> list[LayerState]:
    """Approximate every recurrent layer's state from preceding values.

    ``windows`` is either one window (1-D, length <= m, left-padded with
    ``config.pad_value``) or an (n, m) array of full windows.
    """
    p = ad.as_nodes(p)
    w = np.asarray(windows.value if isinstance(windows, Node) else windows, dtype=np.float64)
    if w.ndim <= 1:
        w = pad_window(w, config.window_m, config.pad_value)[None, :]
    elif w.shape[1] != config.window_m:
        raise ShapeError(f"window width {w.shape[1]} != m={config.window_m}")
    x = ad.constant(w)
    hid = config.hidden
    states = []
    for l in range(1, config.layers):
        out = mlp_forward(p, f"srec{l}", config.srec_spec, x)
        states.append(LayerState(ad.tanh(out[:, :hid]), out[:, hid:]))
    return states
