"""Evaluation protocols: bucket-transition overlap score, reconstruction
statistics, noise-robustness sweeps, and Welch t-test run filtering.

Score normalization
-------------------
The overlap score sums ``min(GM_ij, TM_ij) / TM_ij`` over the cells where the
true transition matrix is nonzero, after scaling the generated counts by
``|T| / |G|``. That raw sum grows with the number of occupied cells, so it
is divided by that count and multiplied by 100 here. Scores therefore lie in
[0, 100] and a series scored against itself gets exactly 100. This
normalization is a choice made by this package, not part of the raw
counting procedure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from . import autodiff as ad
from .data import SeriesFrame
from .train import inject_noise
from .baselines import RnnConfig, dlgm_reconstruct, dlgm_rollout, rnn_reconstruct, rnn_rollout
from .generator import DlgmConfig, TdlgmConfig, generate_step, rollout
from .recognition import causal_windows, latent_recognize, recognize_state

DEFAULT_BUCKETS = 20
HORIZON_STEPS = (2, 5, 8, 10, 15, 20, 25, 30)
ROBUSTNESS_VARIANCES = (0.0053, 0.0059, 0.0067, 0.0077, 0.0091, 0.0111, 0.0143, 0.0200, 0.0333, 0.100)


@dataclass(frozen=True)
class TransitionMatrix:
    buckets: int
    step: int
    counts: np.ndarray


@dataclass(frozen=True)
class ReconStats:
    mean: float
    variance: float
    mse: float


def bucketize(series, buckets: int = DEFAULT_BUCKETS) -> np.ndarray:
    """Uniform-width bucket index ``min(floor(v * B), B - 1)`` for values in [0, 1]."""
    if buckets < 2:
        raise ValueError("need at least two buckets")
    v = np.asarray(series, dtype=np.float64).reshape(-1)
    if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("bucketize expects values in [0, 1]")
    return np.minimum(np.floor(v * buckets).astype(int), buckets - 1)


def transition_matrix(symbols, step: int, buckets: int) -> TransitionMatrix:
    """Count pairs ``(x_i, x_{i+step})``."""
    x = np.asarray(symbols, dtype=int).reshape(-1)
    if step < 1:
        raise ValueError("step must be >= 1")
    if x.size <= step:
        raise ValueError(f"sequence of length {x.size} too short for step {step}")
    if x.min() < 0 or x.max() >= buckets:
        raise ValueError("symbol outside [0, buckets)")
    counts = np.zeros((buckets, buckets), dtype=np.int64)
    np.add.at(counts, (x[:-step], x[step:]), 1)
    return TransitionMatrix(buckets, step, counts)


def score_symbols(true_symbols, gen_symbols, step: int, buckets: int) -> float:
    """Overlap score for already-bucketized sequences (see module docstring)."""
    tm = transition_matrix(true_symbols, step, buckets).counts
    gm = transition_matrix(gen_symbols, step, buckets).counts
    n_true = len(np.asarray(true_symbols).reshape(-1))
    n_gen = len(np.asarray(gen_symbols).reshape(-1))
    rows, cols = np.nonzero(tm)
    # exact rational arithmetic keeps the result independent of summation order
    total = Fraction(0)
    for i, j in zip(rows, cols):
        t = int(tm[i, j])
        total += Fraction(min(int(gm[i, j]) * n_true, t * n_gen), t * n_gen)
    return float(100 * total / len(rows))


def future_score(true_series, gen_series, step: int = 1, buckets: int = DEFAULT_BUCKETS) -> float:
    if len(np.asarray(true_series).reshape(-1)) == 0 or len(np.asarray(gen_series).reshape(-1)) == 0:
        raise ValueError("future_score needs nonempty series")
    return score_symbols(bucketize(true_series, buckets), bucketize(gen_series, buckets), step, buckets)


def reconstruction_stats(true_series, recon_series) -> ReconStats:
    """Mean, population variance and mean square of ``recon - true``."""
    t = np.asarray(true_series, dtype=np.float64).reshape(-1)
    r = np.asarray(recon_series, dtype=np.float64).reshape(-1)
    if t.shape != r.shape:
        raise ValueError(f"length mismatch: {t.size} vs {r.size}")
    e = r - t
    return ReconStats(float(e.mean()), float(e.var()), float(np.mean(e * e)))


def welch_t_filter(group_a: Sequence[float], group_b: Sequence[float], p_threshold: float = 0.7):
    """Two-sided Welch t-test; returns ``(p_value, excluded)`` with ``excluded = p > threshold``."""
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each group needs at least two values")
    if a.var() == 0.0 and b.var() == 0.0:
        p = 1.0 if a.mean() == b.mean() else 0.0
    else:
        p = float(stats.ttest_ind(a, b, equal_var=False).pvalue)
        # scipy's two-sided form can round a zero statistic a hair above 1
        p = min(p, 1.0)
    return p, bool(p > p_threshold)


# --------------------------------------------------------------------------
# model-level pipelines


def reconstruct(model, series) -> np.ndarray:
    """Single-pass reconstruction of every point of ``series``, clamped to [0, 1].

    TDLGM: states from the preceding window, latents at their posterior
    means, output mean. DLGM: posterior means decoded with the history
    window. RNN: one-step-ahead predictions.
    """
    v = np.asarray(series, dtype=np.float64).reshape(-1)
    cfg = model.config
    p = ad.as_nodes(model.params)
    t = np.arange(v.size)
    if isinstance(cfg, TdlgmConfig):
        states = recognize_state(p, cfg, causal_windows(v, t, cfg.window_m, cfg.pad_value))
        specs = latent_recognize(p, cfg, v)
        out, _, _ = generate_step(p, cfg, states, [s.mu for s in specs])
        return np.clip(out.value[:, 0], 0.0, 1.0)
    if isinstance(cfg, DlgmConfig):
        return dlgm_reconstruct(p, cfg, causal_windows(v, t, cfg.history, cfg.pad_value), v)
    if isinstance(cfg, RnnConfig):
        return rnn_reconstruct(p, cfg, v)
    raise TypeError(f"unsupported model config {type(cfg).__name__}")


def generate_future(model, series, steps: int, rng=None, mode: str = "sampled"):
    """Seed each non-overlapping chunk of ``steps`` points from the true values
    before it and generate the chunk.

    Returns ``(starts, true_values, generated)`` with the last two of shape
    (n_chunks, steps).
    """
    v = np.asarray(series, dtype=np.float64).reshape(-1)
    cfg = model.config
    ctx = max(cfg.context, 1)
    if steps < 1 or ctx + steps > v.size:
        raise ValueError(f"steps={steps} does not fit a test series of length {v.size}")
    if mode not in ("mean", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(rng) if mode == "sampled" else None
    starts = np.arange(ctx, v.size - steps + 1, steps)
    truth = np.stack([v[s : s + steps] for s in starts])
    p = ad.as_nodes(model.params)
    if isinstance(cfg, TdlgmConfig):
        states = recognize_state(p, cfg, causal_windows(v, starts, cfg.window_m, cfg.pad_value))
        gen = rollout(p, cfg, states, steps, rng, mode)
    elif isinstance(cfg, DlgmConfig):
        gen = dlgm_rollout(p, cfg, causal_windows(v, starts, cfg.history, cfg.pad_value), steps, rng, mode)
    elif isinstance(cfg, RnnConfig):
        gen = rnn_rollout(p, cfg, causal_windows(v, starts, ctx, cfg.pad_value), steps)
    else:
        raise TypeError(f"unsupported model config {type(cfg).__name__}")
    return starts, truth, gen


def horizon_scores(model, series, steps_list=HORIZON_STEPS, seed=0, mode="sampled", buckets=DEFAULT_BUCKETS, step=1):
    """Overlap score of generated vs true chunks for each horizon in ``steps_list``."""
    scores = {}
    for k, steps in enumerate(steps_list):
        rng = np.random.default_rng([seed, k])
        _, truth, gen = generate_future(model, series, steps, rng, mode)
        scores[steps] = future_score(truth.reshape(-1), gen.reshape(-1), step, buckets)
    return scores


def robustness_sweep(model, test_series, variances: Sequence[float] = ROBUSTNESS_VARIANCES, rng=None):
    """Corrupt every test point with ``N(0, var)`` (clamped) and reconstruct.

    Returns a list of ``(variance, ReconStats)`` in input order.
    """
    rng = np.random.default_rng(rng)
    frame = test_series if isinstance(test_series, SeriesFrame) else SeriesFrame(test_series, (0.0, 1.0))
    if hasattr(model, "model"):
        model = model.model()
    rows = []
    for var in variances:
        if var < 0:
            raise ValueError("variances must be >= 0")
        noisy = inject_noise(frame, 1.0, float(var), rng)
        rows.append((float(var), reconstruction_stats(frame.values, reconstruct(model, noisy.values))))
    return rows
