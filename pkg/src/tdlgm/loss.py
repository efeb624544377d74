"""Surrogate loss for TDLGM (and its stateless DLGM reduction).

Per target step ``t`` the loss adds

* the analytic KL between every layer's latent posterior and ``N(0, I)``,
* ``alpha`` times the MSE between the recognized next state and the state the
  generator's transition produced from the recognized current state,
* the Gaussian negative log-likelihood of ``v_t`` under the generator mean,

averaged over targets, plus ``kappa * 0.5 * ||theta||^2`` for the isotropic
Gaussian parameter prior. Expectations use reparameterized samples whose
noise is drawn up front, so the graph is a deterministic function of the
parameters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ShapeError
from .generator import DlgmConfig, TdlgmConfig, dlgm_generate, generate_step
from .nn import LayerState
from .recognition import GaussianSpec, causal_windows, latent_recognize, recognize_state, reparam_sample

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LossBreakdown:
    kl_latent: float
    state_mse: float
    nll_recon: float
    weight_prior: float
    total: float
    alpha: float = 0.0
    kappa: float = 0.0

    def weighted_sum(self) -> float:
        return self.kl_latent + self.alpha * self.state_mse + self.nll_recon + self.kappa * self.weight_prior

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_parts(cls, kl, mse, nll, prior, alpha, kappa) -> "LossBreakdown":
        kl, mse, nll, prior = float(kl), float(mse), float(nll), float(prior)
        total = kl + alpha * mse + nll + kappa * prior
        return cls(kl, mse, nll, prior, total, float(alpha), float(kappa))


def _kl_rows(spec: GaussianSpec) -> Node:
    mu, cov = spec
    terms = ad.square(mu) + cov - ad.log(cov) - 1.0
    return ad.scale(ad.sum(terms, axis=1), 0.5)


def kl_gaussian_standard(spec: GaussianSpec) -> Node:
    """``KL(N(mu, diag C) || N(0, I))`` summed over all rows, as a scalar node."""
    mu, cov = spec
    mu = mu if isinstance(mu, Node) else ad.constant(np.atleast_2d(mu))
    cov = cov if isinstance(cov, Node) else ad.constant(np.atleast_2d(cov))
    if mu.shape != cov.shape:
        raise ShapeError(f"kl: mu shape {mu.shape} != cov shape {cov.shape}")
    if np.any(cov.value <= 0):
        raise ValueError("kl: covariance entries must be positive")
    return ad.sum(_kl_rows(GaussianSpec(mu, cov)))


def _flatten_states(states: Sequence[LayerState]) -> Node:
    parts = []
    for s in states:
        parts.extend([s.hidden, s.cell])
    return ad.concat([p if isinstance(p, Node) else ad.constant(p) for p in parts], axis=1)


def state_mse(approx_next: Sequence[LayerState], generated_next: Sequence[LayerState]) -> Node:
    if len(approx_next) != len(generated_next):
        raise ShapeError(f"state stacks have {len(approx_next)} and {len(generated_next)} layers")
    a = _flatten_states(approx_next)
    b = _flatten_states(generated_next)
    if a.shape != b.shape:
        raise ShapeError(f"state stacks have shapes {a.shape} and {b.shape}")
    return ad.mean(ad.square(a - b))


def state_regularizer(approx_next, generated_next, alpha: float) -> Node:
    """``alpha`` times the mean squared difference over all state coordinates."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return ad.scale(state_mse(approx_next, generated_next), alpha)


def reconstruction_nll(v_true, v_mean, sigma_out: float) -> Node:
    """Elementwise ``-log N(v_true | v_mean, sigma_out^2)``."""
    if sigma_out <= 0:
        raise ValueError("sigma_out must be positive")
    v_true = v_true if isinstance(v_true, Node) else ad.constant(v_true)
    v_mean = v_mean if isinstance(v_mean, Node) else ad.constant(v_mean)
    z = ad.scale(v_true - v_mean, 1.0 / sigma_out)
    return ad.scale(ad.square(z), 0.5) + (math.log(sigma_out) + HALF_LOG_2PI)


def weight_prior(p: Mapping[str, Node]) -> Node:
    """``0.5 * ||theta||^2`` over every parameter in ``p``."""
    terms = [ad.sum(ad.square(node)) for node in p.values()]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return ad.scale(total, 0.5)


def _check_segment(segment, context):
    seg = np.asarray(segment, dtype=np.float64).reshape(-1)
    if seg.size < context + 2:
        raise ValueError(f"segment length {seg.size} < context + 2 = {context + 2}")
    return seg


def draw_noise(config, segment_len: int, rng: np.random.Generator, n_samples: int = 1):
    """Standard-normal latent noise for one segment: ``[sample][layer] -> (n_targets, latent)``."""
    n = segment_len - config.context
    return [[rng.standard_normal((n, config.latent)) for _ in range(config.layers)] for _ in range(n_samples)]


def tdlgm_loss_graph(p: Mapping[str, Node], config: TdlgmConfig, segment, noise, alpha: float, kappa: float):
    """Build the loss graph for one segment.

    Targets are ``t = m .. len(segment)-1``; ``noise`` comes from
    :func:`draw_noise`. Returns ``(root, parts)`` with ``parts`` holding the
    scalar nodes ``kl``, ``mse``, ``nll`` and ``prior``.
    """
    m = config.window_m
    seg = _check_segment(segment, m)
    n = seg.size - m
    t = np.arange(m, seg.size)
    # states for t = m .. N, rows [:-1] are "current", rows [1:] are "next"
    windows = causal_windows(seg, np.arange(m, seg.size + 1), m, config.pad_value)
    all_states = recognize_state(p, config, windows)
    current = [LayerState(s.hidden[:-1], s.cell[:-1]) for s in all_states]
    approx_next = [LayerState(s.hidden[1:], s.cell[1:]) for s in all_states]

    specs = latent_recognize(p, config, seg[t])
    kl_rows = _kl_rows(specs[0])
    for spec in specs[1:]:
        kl_rows = kl_rows + _kl_rows(spec)
    kl = ad.mean(kl_rows)

    v_true = ad.constant(seg[t].reshape(n, 1))
    nll = mse = None
    for sample in noise:
        xi = [reparam_sample(spec, eps=e) for spec, e in zip(specs, sample)]
        v_mean, gen_next, _ = generate_step(p, config, current, xi)
        nll_s = ad.mean(reconstruction_nll(v_true, v_mean, config.sigma_out))
        mse_s = state_mse(approx_next, gen_next)
        nll = nll_s if nll is None else nll + nll_s
        mse = mse_s if mse is None else mse + mse_s
    if len(noise) > 1:
        nll = ad.scale(nll, 1.0 / len(noise))
        mse = ad.scale(mse, 1.0 / len(noise))

    prior = weight_prior(p)
    root = kl + ad.scale(mse, alpha) + nll + ad.scale(prior, kappa)
    return root, {"kl": kl, "mse": mse, "nll": nll, "prior": prior}


def dlgm_loss_graph(p: Mapping[str, Node], config: DlgmConfig, segment, noise, alpha: float, kappa: float):
    """Latent KL + reconstruction NLL + prior; there is no state term."""
    w = config.history
    seg = _check_segment(segment, w)
    n = seg.size - w
    t = np.arange(w, seg.size)
    history = causal_windows(seg, t, w, config.pad_value)
    specs = latent_recognize(p, config, seg[t])
    kl_rows = _kl_rows(specs[0])
    for spec in specs[1:]:
        kl_rows = kl_rows + _kl_rows(spec)
    kl = ad.mean(kl_rows)
    v_true = ad.constant(seg[t].reshape(n, 1))
    nll = None
    for sample in noise:
        xi = [reparam_sample(spec, eps=e) for spec, e in zip(specs, sample)]
        v_mean = dlgm_generate(p, config, xi, history)
        nll_s = ad.mean(reconstruction_nll(v_true, v_mean, config.sigma_out))
        nll = nll_s if nll is None else nll + nll_s
    if len(noise) > 1:
        nll = ad.scale(nll, 1.0 / len(noise))
    mse = ad.constant(0.0)
    prior = weight_prior(p)
    root = kl + nll + ad.scale(prior, kappa)
    return root, {"kl": kl, "mse": mse, "nll": nll, "prior": prior}


def breakdown(parts: Mapping[str, Node], alpha: float, kappa: float) -> LossBreakdown:
    return LossBreakdown.from_parts(
        parts["kl"].item(), parts["mse"].item(), parts["nll"].item(), parts["prior"].item(), alpha, kappa
    )


def total_loss(model, segment, alpha: float = 1000.0, kappa: float = 1e-4, rng=None, n_samples: int = 1) -> LossBreakdown:
    """Single-segment loss breakdown with fresh noise from ``rng``.

    ``rng`` may be a seed or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(rng)
    seg = np.asarray(segment, dtype=np.float64).reshape(-1)
    config = model.config
    _check_segment(seg, config.context)
    noise = draw_noise(config, seg.size, rng, n_samples)
    graph = tdlgm_loss_graph if isinstance(config, TdlgmConfig) else dlgm_loss_graph
    _, parts = graph(ad.as_nodes(model.params), config, seg, noise, alpha, kappa)
    return breakdown(parts, alpha, kappa)
