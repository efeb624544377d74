"""Generative passes of the layered latent-Gaussian models.

TDLGM layer chain, top to bottom::

    h_L = xi_L @ G_L
    (hid_l, cell_l) = LSTM_l(h_{l+1}, s_l)          l = L-1 .. 1
    h_l = hid_l + xi_l @ G_l
    v ~ N(T_0(h_1), sigma_out^2)

The LSTM update that produces ``hid_l`` also produces layer ``l``'s next
state, so each layer's state is driven by the same input its recurrent
output consumed (the ``h`` from the layer above).

:class:`DlgmModel` is the stateless counterpart, with MLPs in place of the
LSTMs and an optional window of past values fed into the output MLP.

Layer lists are ordered bottom-up: index 0 is layer 1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ParamSet, ShapeError
from .nn import (
    LayerState,
    LstmBlock,
    MatrixBlock,
    MlpBlock,
    MlpSpec,
    init_params,
    lstm_step,
    mlp_forward,
)

StateStack = list  # list[LayerState], one per recurrent layer, bottom-up


@dataclass(frozen=True)
class TdlgmConfig:
    layers: int = 3
    hidden: int = 32
    latent: int = 4
    window_m: int = 8
    sigma_out: float = 0.05
    out_hidden: tuple[int, ...] = (32,)
    rec_hidden: int = 32
    pad_value: float = 0.5

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("TDLGM needs at least two layers")
        if self.window_m < 1:
            raise ValueError("window_m must be >= 1")
        if self.sigma_out <= 0:
            raise ValueError("sigma_out must be positive")
        object.__setattr__(self, "out_hidden", tuple(self.out_hidden))

    @property
    def context(self) -> int:
        return self.window_m

    @property
    def t0_spec(self) -> MlpSpec:
        return MlpSpec((self.hidden, *self.out_hidden, 1))

    @property
    def qrec_spec(self) -> MlpSpec:
        return MlpSpec((1, 2 * self.latent * self.layers))

    @property
    def srec_spec(self) -> MlpSpec:
        return MlpSpec((self.window_m, self.rec_hidden, 2 * self.hidden))

    def layout(self):
        blocks = [MatrixBlock(f"gen.G{l}", self.latent, self.hidden) for l in range(1, self.layers + 1)]
        blocks += [LstmBlock(f"gen.R{l}", self.hidden, self.hidden) for l in range(1, self.layers)]
        blocks.append(MlpBlock("gen.T0", self.t0_spec))
        blocks.append(MlpBlock("qrec", self.qrec_spec))
        blocks += [MlpBlock(f"srec{l}", self.srec_spec) for l in range(1, self.layers)]
        return blocks

    def to_dict(self) -> dict:
        d = asdict(self)
        d["out_hidden"] = list(self.out_hidden)
        return d


@dataclass(frozen=True)
class DlgmConfig:
    layers: int = 3
    hidden: int = 32
    latent: int = 4
    history: int = 8
    sigma_out: float = 0.05
    out_hidden: tuple[int, ...] = (32,)
    pad_value: float = 0.5

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("DLGM needs at least two layers")
        if self.history < 0:
            raise ValueError("history must be >= 0")
        if self.sigma_out <= 0:
            raise ValueError("sigma_out must be positive")
        object.__setattr__(self, "out_hidden", tuple(self.out_hidden))

    @property
    def context(self) -> int:
        return self.history

    @property
    def t_spec(self) -> MlpSpec:
        return MlpSpec((self.hidden, self.hidden, self.hidden))

    @property
    def t0_spec(self) -> MlpSpec:
        return MlpSpec((self.hidden + self.history, *self.out_hidden, 1))

    @property
    def qrec_spec(self) -> MlpSpec:
        return MlpSpec((1, 2 * self.latent * self.layers))

    def layout(self):
        blocks = [MatrixBlock(f"gen.G{l}", self.latent, self.hidden) for l in range(1, self.layers + 1)]
        blocks += [MlpBlock(f"gen.T{l}", self.t_spec) for l in range(1, self.layers)]
        blocks.append(MlpBlock("gen.T0", self.t0_spec))
        blocks.append(MlpBlock("qrec", self.qrec_spec))
        return blocks

    def to_dict(self) -> dict:
        d = asdict(self)
        d["out_hidden"] = list(self.out_hidden)
        return d


@dataclass
class TdlgmModel:
    config: TdlgmConfig
    params: ParamSet = field(repr=False)
    kind = "tdlgm"

    @classmethod
    def init(cls, config: TdlgmConfig | None = None, seed: int = 0) -> "TdlgmModel":
        config = config or TdlgmConfig()
        return cls(config, init_params(config.layout(), seed))


@dataclass
class DlgmModel:
    config: DlgmConfig
    params: ParamSet = field(repr=False)
    kind = "dlgm"

    @classmethod
    def init(cls, config: DlgmConfig | None = None, seed: int = 0) -> "DlgmModel":
        config = config or DlgmConfig()
        return cls(config, init_params(config.layout(), seed))


# --------------------------------------------------------------------------


def sample_latent(config, rng: np.random.Generator, n: int = 1) -> list[np.ndarray]:
    """Draw ``xi_l ~ N(0, I)`` for every layer; returns L arrays of shape (n, latent)."""
    return [rng.standard_normal((n, config.latent)) for _ in range(config.layers)]


def _check_xi(config, xi):
    if len(xi) != config.layers:
        raise ShapeError(f"expected {config.layers} latent blocks, got {len(xi)}")
    for x in xi:
        if np.shape(x.value if isinstance(x, Node) else x)[-1] != config.latent:
            raise ShapeError(f"latent width {np.shape(x)[-1]} != {config.latent}")


def _rows(x):
    if isinstance(x, Node):
        return x
    return ad.constant(np.atleast_2d(np.asarray(x, dtype=np.float64)))


def generate_step(
    p: Mapping,
    config: TdlgmConfig,
    states: Sequence[LayerState],
    xi: Sequence,
    rng: np.random.Generator | None = None,
):
    """One TDLGM generation step.

    Returns ``(v, new_states, h)`` where ``v`` has shape (n, 1). With
    ``rng=None`` the output mean ``T_0(h_1)`` is returned; otherwise ``v`` is
    drawn from ``N(T_0(h_1), sigma_out^2)``. ``h`` is bottom-up.
    """
    p = ad.as_nodes(p)
    L = config.layers
    if len(states) != L - 1:
        raise ShapeError(f"expected {L - 1} layer states, got {len(states)}")
    _check_xi(config, xi)
    xi = [_rows(x) for x in xi]
    h = [None] * L
    new_states = [None] * (L - 1)
    h[L - 1] = xi[L - 1] @ p[f"gen.G{L}"]
    for l in range(L - 1, 0, -1):
        st = lstm_step(p, f"gen.R{l}", h[l], states[l - 1])
        new_states[l - 1] = st
        h[l - 1] = st.hidden + xi[l - 1] @ p[f"gen.G{l}"]
    v = mlp_forward(p, "gen.T0", config.t0_spec, h[0])
    if rng is not None:
        v = v + ad.constant(config.sigma_out * rng.standard_normal(v.shape))
    return v, new_states, h


def rollout(
    p: Mapping,
    config: TdlgmConfig,
    states: Sequence[LayerState],
    steps: int,
    rng: np.random.Generator | None = None,
    mode: str = "mean",
) -> np.ndarray:
    """Generate ``steps`` consecutive values from each row of ``states``.

    ``mode="mean"`` uses zero latents and the output mean at every step;
    ``mode="sampled"`` draws latents from the prior and samples ``v``.
    Returns an array of shape (n, steps) clamped to [0, 1].
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if mode not in ("mean", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sampled" and rng is None:
        raise ValueError("sampled mode needs an rng")
    p = ad.as_nodes(p)
    n = states[0].hidden.shape[0]
    out = np.empty((n, steps))
    zeros = [np.zeros((n, config.latent))] * config.layers
    for k in range(steps):
        if mode == "mean":
            v, states, _ = generate_step(p, config, states, zeros)
        else:
            v, states, _ = generate_step(p, config, states, sample_latent(config, rng, n), rng)
        out[:, k] = v.value[:, 0]
    return np.clip(out, 0.0, 1.0)


def dlgm_generate(p: Mapping, config: DlgmConfig, xi: Sequence, history) -> Node:
    """Output mean of the stateless DLGM, conditioned on a window of past values.

    ``history`` has shape (n, w); with ``w == 0`` this is the plain DLGM.
    """
    p = ad.as_nodes(p)
    _check_xi(config, xi)
    xi = [_rows(x) for x in xi]
    n = xi[0].shape[0]
    history = np.asarray(history.value if isinstance(history, Node) else history, dtype=np.float64)
    if history.size == 0:
        history = np.zeros((n, 0))
    elif history.ndim == 1:
        history = history[None, :]
    if history.shape != (n, config.history):
        raise ShapeError(f"history shape {history.shape} != {(n, config.history)}")
    L = config.layers
    h = xi[L - 1] @ p[f"gen.G{L}"]
    for l in range(L - 1, 0, -1):
        h = mlp_forward(p, f"gen.T{l}", config.t_spec, h) + xi[l - 1] @ p[f"gen.G{l}"]
    if config.history:
        h = ad.concat([h, ad.constant(history)], axis=1)
    return mlp_forward(p, "gen.T0", config.t0_spec, h)
