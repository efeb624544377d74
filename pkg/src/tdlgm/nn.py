"""Neural building blocks: tanh MLPs, the LSTM cell, parameter initialization.

All forward functions take a mapping ``p`` from parameter name to
:class:`~tdlgm.autodiff.Node` and a name prefix, so the same code is used for
plain evaluation and for building a differentiable graph. Inputs are row
batches: shape ``(n, width)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ParamSet, ShapeError

FORGET_BIAS = 1.0


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths of a tanh MLP with an identity output layer."""

    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"MlpSpec needs at least two positive widths, got {self.widths}")
        object.__setattr__(self, "widths", widths)

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]


class LayerState(NamedTuple):
    """Recurrent state of one layer: LSTM hidden and cell vectors."""

    hidden: Node
    cell: Node


def zero_state(hidden_dim: int, n: int = 1) -> LayerState:
    z = np.zeros((n, hidden_dim))
    return LayerState(ad.constant(z), ad.constant(z))


def _rows(x) -> Node:
    if not isinstance(x, Node):
        return ad.constant(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if x.value.ndim != 2:
        raise ShapeError(f"expected a (rows, width) input, got shape {x.shape}")
    return x


def mlp_forward(p: Mapping[str, Node], prefix: str, spec: MlpSpec, x) -> Node:
    x = _rows(x)
    if x.shape[-1] != spec.n_in:
        raise ShapeError(f"mlp {prefix}: input width {x.shape[-1]} != {spec.n_in}")
    n_layers = len(spec.widths) - 1
    for i in range(n_layers):
        x = x @ p[f"{prefix}.W{i}"] + p[f"{prefix}.b{i}"]
        if i < n_layers - 1:
            x = ad.tanh(x)
    return x


def lstm_dims(p: Mapping[str, Node], prefix: str) -> tuple[int, int]:
    """(input_dim, hidden_dim) of the LSTM stored under ``prefix``."""
    w = p[f"{prefix}.W"]
    hidden = w.shape[1] // 4
    return w.shape[0] - hidden, hidden


def lstm_step(p: Mapping[str, Node], prefix: str, x, state: LayerState) -> LayerState:
    """One LSTM update.

    Gates are stored fused in a single ``(input+hidden, 4*hidden)`` matrix in
    the order input, forget, output, candidate.
    """
    x = _rows(x)
    n_in, hid = lstm_dims(p, prefix)
    if x.shape[-1] != n_in:
        raise ShapeError(f"lstm {prefix}: input width {x.shape[-1]} != {n_in}")
    if state.hidden.shape[-1] != hid or state.cell.shape[-1] != hid:
        raise ShapeError(
            f"lstm {prefix}: state widths {state.hidden.shape[-1]}/{state.cell.shape[-1]} != {hid}"
        )
    z = ad.concat([x, state.hidden], axis=1) @ p[f"{prefix}.W"] + p[f"{prefix}.b"]
    i_gate = ad.sigmoid(z[:, 0:hid])
    f_gate = ad.sigmoid(z[:, hid : 2 * hid])
    o_gate = ad.sigmoid(z[:, 2 * hid : 3 * hid])
    cand = ad.tanh(z[:, 3 * hid :])
    cell = f_gate * state.cell + i_gate * cand
    hidden = o_gate * ad.tanh(cell)
    return LayerState(hidden, cell)


# --------------------------------------------------------------------------
# initialization


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass(frozen=True)
class MlpBlock:
    prefix: str
    spec: MlpSpec


@dataclass(frozen=True)
class LstmBlock:
    prefix: str
    input_dim: int
    hidden_dim: int


@dataclass(frozen=True)
class MatrixBlock:
    name: str
    rows: int
    cols: int


def init_params(layout: Sequence[MlpBlock | LstmBlock | MatrixBlock], seed: int) -> ParamSet:
    """Xavier-uniform weights, zero biases, forget-gate bias 1.

    Blocks are initialized in layout order from a single generator, so the
    same ``(layout, seed)`` always yields bit-identical parameters.
    """
    rng = np.random.default_rng(seed)
    params = ParamSet()
    for block in layout:
        if isinstance(block, MlpBlock):
            w = block.spec.widths
            for i in range(len(w) - 1):
                params[f"{block.prefix}.W{i}"] = xavier_uniform(rng, w[i], w[i + 1])
                params[f"{block.prefix}.b{i}"] = np.zeros(w[i + 1])
        elif isinstance(block, LstmBlock):
            n_in, hid = block.input_dim, block.hidden_dim
            # each gate block gets its own (fan_in, hidden) bound
            gates = [xavier_uniform(rng, n_in + hid, hid) for _ in range(4)]
            params[f"{block.prefix}.W"] = np.concatenate(gates, axis=1)
            bias = np.zeros(4 * hid)
            bias[hid : 2 * hid] = FORGET_BIAS
            params[f"{block.prefix}.b"] = bias
        elif isinstance(block, MatrixBlock):
            params[block.name] = xavier_uniform(rng, block.rows, block.cols)
        else:
            raise TypeError(f"unknown layout block {block!r}")
    return params
