"""Batch command-line front end: ``python -m tdlgm {train,reconstruct,generate,robustness,rerun}``.

Every command writes its outputs into ``--out`` together with a
``manifest.json`` recording the exact argument vector, the resolved
configuration and the input/output paths. ``rerun`` replays a manifest and
reproduces the outputs byte for byte (the manifest's own wall-clock field
aside).

``--data`` accepts a CSV path (relative paths fall back to
``$TDLGM_DATA_DIR``) or a synthetic spec ``synth:KIND:LENGTH:SEED``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, csv_text
from .data import DEFAULT_COLUMN, SeriesFrame, load_frames, split, synth_series
from .evaluation import (
    DEFAULT_BUCKETS,
    HORIZON_STEPS,
    ROBUSTNESS_VARIANCES,
    future_score,
    generate_future,
    reconstruct,
    reconstruction_stats,
    robustness_sweep,
)
from .train import (
    MODEL_KINDS,
    TrainConfig,
    build_architecture,
    checkpoint_to_text,
    inject_noise,
    load_checkpoint,
    trace_csv,
    train_model,
)

MANIFEST = "manifest.json"


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def load_data(spec: str, column: str, train_fraction: float, min_length: int) -> tuple[SeriesFrame, SeriesFrame]:
    """Resolve ``--data`` into (train, test) frames."""
    if spec.startswith("synth:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise CliError(f"synthetic data spec must be synth:KIND:LENGTH:SEED, got {spec!r}")
        try:
            frame = synth_series(parts[1], int(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise CliError(str(exc)) from None
        return split(frame, train_fraction, min_length)
    return load_frames(spec, column, train_fraction, min_length)


def _data_args(p: argparse.ArgumentParser, required=True):
    p.add_argument("--data", required=required, help="CSV path or synth:KIND:LENGTH:SEED")
    p.add_argument("--column", default=DEFAULT_COLUMN)
    p.add_argument("--train-fraction", type=float, default=0.8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdlgm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tdlgm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = TrainConfig()
    arch = build_architecture("tdlgm")

    p = sub.add_parser("train", help="train a model and write checkpoint + loss trace")
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="tdlgm")
    _data_args(p)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--alpha", type=float, default=defaults.alpha)
    p.add_argument("--kappa", type=float, default=defaults.kappa)
    p.add_argument("--lr", type=float, default=defaults.lr)
    p.add_argument("--segment-length", type=int, default=defaults.segment_length)
    p.add_argument("--noise-prob", type=float, default=0.0)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--layers", type=int, default=arch.layers)
    p.add_argument("--hidden", type=int, default=arch.hidden)
    p.add_argument("--latent", type=int, default=arch.latent)
    p.add_argument("--window-m", type=int, default=arch.window_m, help="state window (tdlgm), history (dlgm), burn-in (rnn)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("reconstruct", help="reconstruct the (optionally corrupted) test split")
    p.add_argument("--checkpoint", required=True)
    _data_args(p)
    p.add_argument("--noise-prob", type=float, default=0.0)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("generate", help="generate future chunks and score them per horizon")
    p.add_argument("--checkpoint", required=True)
    _data_args(p)
    p.add_argument("--steps", type=_int_list, default=list(HORIZON_STEPS))
    p.add_argument("--mode", choices=("sampled", "mean"), default="sampled")
    p.add_argument("--buckets", type=int, default=DEFAULT_BUCKETS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("robustness", help="reconstruction error under a sweep of noise variances")
    p.add_argument("--checkpoint", required=True)
    _data_args(p)
    p.add_argument("--variances", type=_float_list, default=list(ROBUSTNESS_VARIANCES))
    p.add_argument("--include-clean", action="store_true", help="prepend variance 0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write into this directory instead of the recorded one")
    return parser


# --------------------------------------------------------------------------
# commands; each returns (resolved config, {file name: text})


def _architecture(args):
    if args.model == "tdlgm":
        return build_architecture("tdlgm", layers=args.layers, hidden=args.hidden, latent=args.latent, window_m=args.window_m)
    if args.model == "dlgm":
        return build_architecture("dlgm", layers=args.layers, hidden=args.hidden, latent=args.latent, history=args.window_m)
    return build_architecture("rnn", hidden=args.hidden, burn_in=args.window_m)


def cmd_train(args):
    cfg = TrainConfig(
        epochs=args.epochs,
        segment_length=args.segment_length,
        lr=args.lr,
        alpha=args.alpha,
        kappa=args.kappa,
        seed=args.seed,
        noise_prob=args.noise_prob,
        noise_var=args.noise_var,
    )
    arch = _architecture(args)
    train, _ = load_data(args.data, args.column, args.train_fraction, arch.context + 2)
    cp, trace = train_model(args.model, train, cfg, arch)
    outputs = {"checkpoint.json": checkpoint_to_text(cp), "trace.csv": trace_csv(trace)}
    return {"train": cfg.to_dict(), "architecture": arch.to_dict(), "model": args.model}, outputs


def _checkpoint_and_test(args):
    cp = load_checkpoint(args.checkpoint)
    model = cp.model()
    _, test = load_data(args.data, args.column, args.train_fraction, model.config.context + 2)
    return cp, model, test


def cmd_reconstruct(args):
    cp, model, test = _checkpoint_and_test(args)
    noisy = inject_noise(test, args.noise_prob, args.noise_var, np.random.default_rng(args.seed))
    recon = reconstruct(model, noisy.values)
    rows = [(t, float(a), float(b), float(c)) for t, (a, b, c) in enumerate(zip(test.values, noisy.values, recon))]
    st = reconstruction_stats(test.values, recon)
    stats_rows = [(float(args.noise_prob), float(args.noise_var), cp.kind, st.mean, st.variance, st.mse)]
    outputs = {
        "reconstruction.csv": csv_text(("t", "true", "noisy_input", "recon"), rows),
        "stats.csv": csv_text(("noise_prob", "noise_var", "model", "mean", "variance", "mse"), stats_rows),
    }
    return {"model": cp.kind}, outputs


def cmd_generate(args):
    cp, model, test = _checkpoint_and_test(args)
    ctx = max(model.config.context, 1)
    bad = [s for s in args.steps if s < 1 or ctx + s > len(test)]
    if bad:
        raise CliError(f"steps {bad} do not fit a test split of length {len(test)}")
    rollout_rows, score_rows = [], []
    for k, steps in enumerate(args.steps):
        rng = np.random.default_rng([args.seed, k])
        starts, truth, gen = generate_future(model, test.values, steps, rng, args.mode)
        for c, s in enumerate(starts):
            for j in range(steps):
                rollout_rows.append((steps, c, int(s + j), float(truth[c, j]), float(gen[c, j])))
        score_rows.append((steps, future_score(truth.reshape(-1), gen.reshape(-1), 1, args.buckets)))
    outputs = {
        "rollout.csv": csv_text(("steps", "chunk", "t", "true", "generated"), rollout_rows),
        "scores.csv": csv_text(("steps", "score"), score_rows),
    }
    return {"model": cp.kind, "steps": list(args.steps), "mode": args.mode}, outputs


def cmd_robustness(args):
    cp, model, test = _checkpoint_and_test(args)
    if cp.config.get("noise_prob", 0.0) > 0 and cp.config.get("noise_var", 0.0) > 0:
        print("warning: checkpoint was trained on noisy data; the sweep assumes clean training", file=sys.stderr)
    variances = ([0.0] if args.include_clean else []) + list(args.variances)
    rows = [(v, cp.kind, s.mean, s.variance, s.mse) for v, s in robustness_sweep(model, test, variances, args.seed)]
    outputs = {"robustness.csv": csv_text(("noise_var", "model", "mean", "variance", "mse"), rows)}
    return {"model": cp.kind, "variances": variances}, outputs


COMMANDS = {"train": cmd_train, "reconstruct": cmd_reconstruct, "generate": cmd_generate, "robustness": cmd_robustness}


def _replace_out(argv: list[str], out: str) -> list[str]:
    argv = list(argv)
    i = argv.index("--out")
    argv[i + 1] = out
    return argv


def _normalized_argv(args) -> list[str]:
    """Canonical argument vector with every option spelled out."""
    argv = [args.command]
    for key, val in sorted(vars(args).items()):
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif isinstance(val, list):
            argv += [flag, ",".join(repr(x) for x in val)]
        else:
            argv += [flag, str(val)]
    return argv


def run(args) -> int:
    t0 = time.perf_counter()
    config, outputs = COMMANDS[args.command](args)
    out = Path(args.out)
    for name, text in outputs.items():
        atomic_write_text(out / name, text)
    inputs = {"data": args.data}
    if hasattr(args, "checkpoint"):
        inputs["checkpoint"] = args.checkpoint
    manifest = {
        "command": args.command,
        "argv": _normalized_argv(args),
        "config": {**config, "args": {k: v for k, v in sorted(vars(args).items()) if k != "command"}},
        "seed": args.seed,
        "inputs": inputs,
        "outputs": sorted(str(out / n) for n in outputs),
        "version": __version__,
        "duration_s": round(time.perf_counter() - t0, 3),
    }
    atomic_write_text(out / MANIFEST, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"wrote {', '.join(sorted(outputs))} to {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            replay = doc["argv"] if args.out is None else _replace_out(doc["argv"], args.out)
            args = parser.parse_args(replay)
        return run(args)
    except (OSError, ValueError, KeyError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
