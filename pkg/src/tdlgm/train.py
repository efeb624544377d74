"""Training loop, noise injection, Adam, and checkpoints for all three model kinds."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from ._io import atomic_write_text, csv_text
from .autodiff import ParamSet
from .baselines import RnnConfig, RnnPredictor, rnn_loss_graph
from .data import SeriesFrame
from .generator import DlgmConfig, DlgmModel, TdlgmConfig, TdlgmModel
from .loss import LossBreakdown, breakdown, dlgm_loss_graph, draw_noise, tdlgm_loss_graph

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

MODEL_KINDS = {
    "tdlgm": (TdlgmConfig, TdlgmModel, tdlgm_loss_graph),
    "dlgm": (DlgmConfig, DlgmModel, dlgm_loss_graph),
    "rnn": (RnnConfig, RnnPredictor, rnn_loss_graph),
}

TRACE_COLUMNS = ("epoch", "kl_latent", "state_mse", "nll_recon", "weight_prior", "total")


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    segment_length: int = 32
    lr: float = 1e-3
    alpha: float = 1000.0  # comparable to the 1/(2 sigma_out^2) weight on the likelihood
    kappa: float = 1e-4
    seed: int = 0
    noise_prob: float = 0.0
    noise_var: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    n_samples: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.segment_length < 2:
            raise ValueError("segment_length must be >= 2")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.alpha < 0 or self.kappa < 0:
            raise ValueError("alpha and kappa must be >= 0")
        if not 0.0 <= self.noise_prob <= 1.0:
            raise ValueError("noise_prob must lie in [0, 1]")
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.eps_adam > 0):
            raise ValueError("invalid Adam hyperparameters")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def inject_noise(series: SeriesFrame, p_noise: float, variance: float, rng: np.random.Generator) -> SeriesFrame:
    """With probability ``p_noise`` add ``N(0, variance)`` to each point; clamp to [0, 1].

    Both the flags and the draws are always consumed from ``rng`` so the
    stream position does not depend on the parameters.
    """
    if not 0.0 <= p_noise <= 1.0:
        raise ValueError("p_noise must lie in [0, 1]")
    if variance < 0:
        raise ValueError("variance must be >= 0")
    v = series.values
    flags = rng.random(v.size) < p_noise
    draws = rng.standard_normal(v.size) * math.sqrt(variance)
    if p_noise == 0.0 or variance == 0.0:
        return series.with_values(v.copy())
    out = np.where(flags, np.clip(v + draws, 0.0, 1.0), v)
    return series.with_values(out, series.source + f"+noise({p_noise},{variance})")


class Adam:
    """Adam with bias correction; moments are keyed by parameter name."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    @classmethod
    def from_config(cls, config: TrainConfig) -> "Adam":
        return cls(config.lr, config.beta1, config.beta2, config.eps_adam)

    def step(self, params: ParamSet, grads: dict[str, np.ndarray]) -> None:
        missing = [k for k in params if k not in grads]
        if missing:
            raise KeyError(f"missing gradients for {missing}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {k}")
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] = p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def optimizer_step(params: ParamSet, grads: dict[str, np.ndarray], state: Adam) -> ParamSet:
    """Apply one Adam update in place and return ``params``."""
    state.step(params, grads)
    return params


@dataclass
class Checkpoint:
    kind: str
    architecture: dict
    params: ParamSet = field(repr=False)
    config: dict = field(default_factory=dict)
    final_loss: dict | None = None
    meta: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def model(self):
        return model_from_spec(self.kind, self.architecture, self.params)


def build_architecture(kind: str, **overrides):
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}")
    return MODEL_KINDS[kind][0](**overrides)


def model_from_spec(kind: str, architecture, params: ParamSet | None = None, seed: int = 0):
    cfg_cls, model_cls, _ = MODEL_KINDS[kind]
    cfg = architecture if isinstance(architecture, cfg_cls) else cfg_cls(**architecture)
    if params is None:
        return model_cls.init(cfg, seed)
    model = model_cls(cfg, ParamSet(params))
    expected = model_cls.init(cfg, 0).params
    if list(expected) != list(model.params) or any(expected[k].shape != model.params[k].shape for k in expected):
        raise CheckpointError(f"parameters do not match the {kind} architecture")
    return model


def segments(series: np.ndarray, segment_length: int, context: int) -> list[np.ndarray]:
    """Context-prefixed segments whose target blocks tile the series without overlap.

    Segment ``k`` covers targets ``context + k*S .. context + (k+1)*S - 1`` and
    carries the ``context`` values before them; a trailing block with fewer
    than two targets is dropped.
    """
    out = []
    start = context
    while start + 2 <= series.size:
        out.append(series[start - context : min(start + segment_length, series.size)])
        start += segment_length
    return out


def _mean_breakdown(items: list[LossBreakdown], alpha, kappa) -> LossBreakdown:
    arr = np.array([[b.kl_latent, b.state_mse, b.nll_recon, b.weight_prior] for b in items])
    kl, mse, nll, prior = arr.mean(axis=0)
    return LossBreakdown.from_parts(kl, mse, nll, prior, alpha, kappa)


def segment_loss(model, segment, config: TrainConfig, noise):
    """Build ``(root, leaves, parts)`` for one segment of any model kind."""
    graph = MODEL_KINDS[model.kind][2]
    leaves = model.params.leaves()
    root, parts = graph(leaves, model.config, segment, noise, config.alpha, config.kappa)
    return root, leaves, parts


def train_model(kind: str, data: SeriesFrame, config: TrainConfig, architecture=None, progress=None):
    """Train a model of ``kind`` on ``data``.

    Returns ``(checkpoint, trace)`` where ``trace`` holds one epoch-mean
    :class:`LossBreakdown` per epoch. Everything random derives from
    ``config.seed``.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    values = data.values if isinstance(data, SeriesFrame) else np.asarray(data, dtype=np.float64)
    if values.size < 4 * config.segment_length:
        raise ValueError(f"need at least {4 * config.segment_length} points, got {values.size}")
    if architecture is None:
        architecture = MODEL_KINDS[kind][0]()
    init_ss, noise_ss, order_ss, mc_ss = np.random.SeedSequence(config.seed).spawn(4)
    model = model_from_spec(kind, architecture, seed=int(init_ss.generate_state(1)[0]))
    if config.segment_length < model.config.context + 2:
        raise ValueError(f"segment_length must be >= context + 2 = {model.config.context + 2}")

    frame = data if isinstance(data, SeriesFrame) else SeriesFrame(values, (0.0, 1.0))
    noisy = inject_noise(frame, config.noise_prob, config.noise_var, np.random.default_rng(noise_ss))
    segs = segments(noisy.values, config.segment_length, model.config.context)
    order_rng = np.random.default_rng(order_ss)
    mc_rng = np.random.default_rng(mc_ss)
    opt = Adam.from_config(config)

    trace: list[LossBreakdown] = []
    for epoch in range(config.epochs):
        items = []
        for idx in order_rng.permutation(len(segs)):
            seg = segs[idx]
            noise = draw_noise(model.config, seg.size, mc_rng, config.n_samples) if kind != "rnn" else []
            root, leaves, parts = segment_loss(model, seg, config, noise)
            items.append(breakdown(parts, config.alpha, config.kappa))
            opt.step(model.params, ad.backward(root, leaves))
        epoch_loss = _mean_breakdown(items, config.alpha, config.kappa)
        trace.append(epoch_loss)
        log.info("epoch %d total %.6f", epoch, epoch_loss.total)
        if progress is not None:
            progress(epoch, epoch_loss)

    cp = Checkpoint(
        kind=kind,
        architecture=model.config.to_dict(),
        params=model.params,
        config=config.to_dict(),
        final_loss=trace[-1].as_dict() if trace else None,
        meta={"scaler": list(frame.scaler), "source": frame.source, "n_train": int(values.size)},
    )
    return cp, trace


def trace_csv(trace: list[LossBreakdown]) -> str:
    rows = [(i, b.kl_latent, b.state_mse, b.nll_recon, b.weight_prior, b.total) for i, b in enumerate(trace)]
    return csv_text(TRACE_COLUMNS, rows)


# --------------------------------------------------------------------------
# checkpoint files: one JSON document, floats written with repr (exact round trip)


def checkpoint_to_text(cp: Checkpoint) -> str:
    doc = {
        "format_version": cp.format_version,
        "kind": cp.kind,
        "architecture": cp.architecture,
        "config": cp.config,
        "final_loss": cp.final_loss,
        "meta": cp.meta,
        "params": {
            k: {"shape": list(v.shape), "data": [float(x) for x in np.asarray(v).reshape(-1)]}
            for k, v in cp.params.items()
        },
    }
    return json.dumps(doc, indent=1) + "\n"


def save_checkpoint(cp: Checkpoint, path) -> None:
    atomic_write_text(path, checkpoint_to_text(cp))


def load_checkpoint(path) -> Checkpoint:
    try:
        text = Path(path).read_text(encoding="utf-8")
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointError(f"corrupt checkpoint {path}: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint {path} has format version {doc['format_version']}, expected {FORMAT_VERSION}"
        )
    try:
        params = ParamSet()
        for k, entry in doc["params"].items():
            shape = tuple(int(s) for s in entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64)
            if data.size != int(np.prod(shape)):
                raise CheckpointError(f"corrupt checkpoint {path}: {k} has {data.size} values for shape {shape}")
            params[k] = data.reshape(shape)
        cp = Checkpoint(
            kind=doc["kind"],
            architecture=doc["architecture"],
            params=params,
            config=doc.get("config", {}),
            final_loss=doc.get("final_loss"),
            meta=doc.get("meta", {}),
            format_version=doc["format_version"],
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc!r}") from None
    if cp.kind not in MODEL_KINDS:
        raise CheckpointError(f"checkpoint {path}: unknown model kind {cp.kind!r}")
    return cp
