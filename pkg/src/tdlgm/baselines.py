"""Comparison models: a plain LSTM next-step predictor and history-windowed DLGM."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ParamSet, ShapeError
from .generator import DlgmConfig, DlgmModel, dlgm_generate, sample_latent  # noqa: F401
from .loss import weight_prior
from .nn import LayerState, LstmBlock, MlpBlock, MlpSpec, init_params, lstm_step, mlp_forward, zero_state
from .recognition import latent_recognize


@dataclass(frozen=True)
class RnnConfig:
    hidden: int = 32
    burn_in: int = 8
    pad_value: float = 0.5

    @property
    def context(self) -> int:
        return self.burn_in

    @property
    def head_spec(self) -> MlpSpec:
        return MlpSpec((self.hidden, 1))

    def layout(self):
        return [LstmBlock("rnn.cell", 1, self.hidden), MlpBlock("rnn.head", self.head_spec)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RnnPredictor:
    config: RnnConfig
    params: ParamSet = field(repr=False)
    kind = "rnn"

    @classmethod
    def init(cls, config: RnnConfig | None = None, seed: int = 0) -> "RnnPredictor":
        config = config or RnnConfig()
        return cls(config, init_params(config.layout(), seed))


def rnn_predict_step(p: Mapping, config: RnnConfig, v_t, state: LayerState | None = None):
    """Predict ``v_{t+1}`` from ``v_t``; returns ``(v_hat, new_state)``."""
    p = ad.as_nodes(p)
    if not isinstance(v_t, Node):
        v_t = ad.constant(np.asarray(v_t, dtype=np.float64).reshape(-1, 1))
    if v_t.shape[-1] != 1:
        raise ShapeError(f"rnn input width {v_t.shape[-1]} != 1")
    if state is None:
        state = zero_state(config.hidden, v_t.shape[0])
    new_state = lstm_step(p, "rnn.cell", v_t, state)
    return mlp_forward(p, "rnn.head", config.head_spec, new_state.hidden), new_state


def rnn_loss_graph(p: Mapping[str, Node], config: RnnConfig, segment, noise, alpha: float, kappa: float):
    """Next-step MSE over the segment after ``burn_in`` warm-up steps, plus prior.

    ``noise`` and ``alpha`` are accepted for a uniform signature and ignored.
    """
    seg = np.asarray(segment, dtype=np.float64).reshape(-1)
    if seg.size < config.burn_in + 2:
        raise ValueError(f"segment length {seg.size} < burn_in + 2")
    state = zero_state(config.hidden)
    preds = []
    for t in range(seg.size - 1):
        v_hat, state = rnn_predict_step(p, config, seg[t : t + 1], state)
        if t + 1 >= config.burn_in:
            preds.append(v_hat)
    pred = ad.concat(preds, axis=0)
    target = ad.constant(seg[config.burn_in :].reshape(-1, 1))
    mse = ad.mean(ad.square(pred - target))
    prior = weight_prior(p)
    root = mse + ad.scale(prior, kappa)
    zero = ad.constant(0.0)
    return root, {"kl": zero, "mse": zero, "nll": mse, "prior": prior}


def rnn_reconstruct(p: Mapping, config: RnnConfig, series) -> np.ndarray:
    """One-step-ahead predictions for every position of ``series``.

    The first prediction comes from feeding ``pad_value`` into a zero state.
    """
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    inputs = np.concatenate([[config.pad_value], series[:-1]])
    p = ad.as_nodes(p)
    state = zero_state(config.hidden)
    out = np.empty(series.size)
    for t, x in enumerate(inputs):
        v_hat, state = rnn_predict_step(p, config, [x], state)
        out[t] = v_hat.value[0, 0]
    return np.clip(out, 0.0, 1.0)


def rnn_warm_state(p: Mapping, config: RnnConfig, windows: np.ndarray):
    """Run the predictor over each row of ``windows``; returns (last prediction, state)."""
    p = ad.as_nodes(p)
    windows = np.atleast_2d(windows)
    state = zero_state(config.hidden, windows.shape[0])
    v_hat = ad.constant(np.full((windows.shape[0], 1), config.pad_value))
    for k in range(windows.shape[1]):
        v_hat, state = rnn_predict_step(p, config, windows[:, k : k + 1], state)
    return v_hat, state


def rnn_rollout(p: Mapping, config: RnnConfig, windows: np.ndarray, steps: int) -> np.ndarray:
    """Warm up on each window, then feed predictions back for ``steps`` values."""
    p = ad.as_nodes(p)
    v_hat, state = rnn_warm_state(p, config, windows)
    out = np.empty((v_hat.shape[0], steps))
    for k in range(steps):
        out[:, k] = np.clip(v_hat.value[:, 0], 0.0, 1.0)
        if k + 1 < steps:
            v_hat, state = rnn_predict_step(p, config, ad.constant(out[:, k : k + 1]), state)
    return out


def dlgm_reconstruct(p: Mapping, config: DlgmConfig, window, v_t) -> np.ndarray:
    """Decode ``v_t`` through its posterior mean, conditioned on the history window.

    ``window`` has shape (n, w) (or (w,) for one point); output is clamped to [0, 1].
    """
    p = ad.as_nodes(p)
    v_t = np.asarray(v_t, dtype=np.float64).reshape(-1)
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window.reshape(1, -1) if window.size else np.zeros((1, 0))
    if window.shape != (v_t.size, config.history):
        raise ShapeError(f"history shape {window.shape} != {(v_t.size, config.history)}")
    specs = latent_recognize(p, config, v_t)
    v = dlgm_generate(p, config, [s.mu for s in specs], window)
    return np.clip(v.value[:, 0], 0.0, 1.0)


def dlgm_rollout(p: Mapping, config: DlgmConfig, windows: np.ndarray, steps: int, rng=None, mode="mean"):
    """Generate forward by sliding the history window over generated values."""
    p = ad.as_nodes(p)
    windows = np.array(np.atleast_2d(windows), dtype=np.float64)
    n = windows.shape[0]
    if config.history == 0:
        windows = np.zeros((n, 0))
    out = np.empty((n, steps))
    for k in range(steps):
        if mode == "mean":
            xi = [np.zeros((n, config.latent))] * config.layers
        else:
            xi = sample_latent(config, rng, n)
        v = dlgm_generate(p, config, xi, windows).value[:, 0]
        if mode != "mean":
            v = v + config.sigma_out * rng.standard_normal(n)
        out[:, k] = np.clip(v, 0.0, 1.0)
        if config.history:
            windows = np.concatenate([windows[:, 1:], out[:, k : k + 1]], axis=1)
    return out
