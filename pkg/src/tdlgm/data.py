"""Trace ingestion, min-max normalization, chronological splits, synthetic series."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_COLUMN = "GPU_MILLI"
DATA_DIR_ENV = "TDLGM_DATA_DIR"


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class SeriesFrame:
    """A univariate series scaled to [0, 1] plus the scaler that produced it."""

    values: np.ndarray
    scaler: tuple[float, float]
    source: str = ""
    degenerate: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise DataError("SeriesFrame values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "scaler", (float(self.scaler[0]), float(self.scaler[1])))

    def __len__(self):
        return self.values.size

    def with_values(self, values, source=None) -> "SeriesFrame":
        return SeriesFrame(np.asarray(values), self.scaler, self.source if source is None else source, self.degenerate)

    def denormalize(self, values=None) -> np.ndarray:
        values = self.values if values is None else np.asarray(values, dtype=np.float64)
        lo, hi = self.scaler
        if self.degenerate:
            return np.full(values.shape, lo)
        return values * (hi - lo) + lo


def resolve_path(path) -> Path:
    """Return ``path``, falling back to ``$TDLGM_DATA_DIR/path`` when it is missing."""
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
        alt = Path(os.environ[DATA_DIR_ENV]) / p
        if alt.exists():
            return alt
    return p


def load_csv(path, column_name: str = DEFAULT_COLUMN) -> tuple[np.ndarray, int]:
    """Read one numeric column in file order.

    Returns ``(values, n_skipped)`` where rows with empty or non-numeric cells
    are skipped and counted.
    """
    p = resolve_path(path)
    if not p.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    values: list[float] = []
    skipped = 0
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if column_name not in header:
            raise DataError(f"{path}: column {column_name!r} not found; available: {header}")
        idx = header.index(column_name)
        for row in reader:
            if not row:
                continue
            try:
                x = float(row[idx])
            except (IndexError, ValueError):
                skipped += 1
                continue
            if not math.isfinite(x):
                skipped += 1
                continue
            values.append(x)
    if not values:
        raise DataError(f"{path}: no usable rows in column {column_name!r}")
    return np.asarray(values), skipped


def write_csv(path, values, column_name: str = DEFAULT_COLUMN) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([column_name])
        for x in np.asarray(values).reshape(-1):
            w.writerow([repr(float(x))])


def normalize(raw, scaler: tuple[float, float] | None = None, source: str = "") -> SeriesFrame:
    """Min-max scale to [0, 1].

    With ``scaler`` given (e.g. from the training split) values are scaled by
    it and clipped to [0, 1]. A constant series maps to all 0.5 and the frame
    is flagged degenerate.
    """
    raw = np.asarray(raw, dtype=np.float64).reshape(-1)
    if raw.size == 0:
        raise DataError("cannot normalize an empty series")
    lo, hi = (float(raw.min()), float(raw.max())) if scaler is None else scaler
    if hi <= lo:
        return SeriesFrame(np.full(raw.size, 0.5), (lo, hi), source, degenerate=True)
    return SeriesFrame(np.clip((raw - lo) / (hi - lo), 0.0, 1.0), (lo, hi), source)


def split(frame: SeriesFrame, train_fraction: float = 0.8, min_length: int = 0) -> tuple[SeriesFrame, SeriesFrame]:
    """Contiguous chronological split; the train side gets ``floor(n * fraction)``."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    n_train = int(math.floor(len(frame) * train_fraction))
    train_v, test_v = frame.values[:n_train], frame.values[n_train:]
    if train_v.size < min_length or test_v.size < min_length:
        raise DataError(f"split sides {train_v.size}/{test_v.size} shorter than {min_length}")
    return (
        SeriesFrame(train_v, frame.scaler, frame.source + "[train]", frame.degenerate),
        SeriesFrame(test_v, frame.scaler, frame.source + "[test]", frame.degenerate),
    )


def load_frames(path, column_name=DEFAULT_COLUMN, train_fraction=0.8, min_length=0):
    """load -> split raw chronologically -> scale both sides with the train scaler."""
    raw, _ = load_csv(path, column_name)
    n_train = int(math.floor(raw.size * train_fraction))
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    if n_train < max(min_length, 1) or raw.size - n_train < min_length:
        raise DataError(f"split sides {n_train}/{raw.size - n_train} shorter than {min_length}")
    train = normalize(raw[:n_train], source=f"{path}[train]")
    test = normalize(raw[n_train:], scaler=train.scaler, source=f"{path}[test]")
    if train.degenerate:
        test = SeriesFrame(np.full(raw.size - n_train, 0.5), train.scaler, test.source, True)
    return train, test


SYNTH_NOISE_VAR = 0.0004


def synth_series(kind: str, length: int, seed: int = 0, noise_var: float = SYNTH_NOISE_VAR) -> SeriesFrame:
    """Desk-scale synthetic series in [0, 1].

    ``sine``: ``0.5 + 0.4 sin(2 pi t / 32)`` plus Gaussian noise.
    ``regime_switch``: levels 0.2 / 0.8 alternating after geometric dwell
    times with mean 16 steps, plus the same noise.
    """
    if length < 64:
        raise DataError("synthetic series need length >= 64")
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    if kind == "sine":
        base = 0.5 + 0.4 * np.sin(2.0 * np.pi * t / 32.0)
    elif kind == "regime_switch":
        base = np.empty(length)
        level, pos = 0, 0
        while pos < length:
            dwell = int(rng.geometric(1.0 / 16.0))
            base[pos : pos + dwell] = (0.2, 0.8)[level]
            pos += dwell
            level ^= 1
    else:
        raise DataError(f"unknown synthetic kind {kind!r}")
    noise = rng.normal(0.0, math.sqrt(noise_var), length) if noise_var > 0 else 0.0
    values = np.clip(base + noise, 0.0, 1.0)
    return SeriesFrame(values, (0.0, 1.0), f"synth:{kind}:{length}:{seed}")
