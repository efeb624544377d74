"""
Generating the future
=====================

Seed rollouts from the true history, run them forward, and compare the
distribution of generated values with the truth at several horizons.
"""

# %%
from tdlgm.baselines import RnnConfig
from tdlgm.data import split, synth_series
from tdlgm.evaluation import generate_future, horizon_scores
from tdlgm.train import TrainConfig, train_model

train, test = split(synth_series("sine", 2048, 0), 0.8)
tdlgm, _ = train_model("tdlgm", train, TrainConfig(epochs=30, seed=0))
rnn, _ = train_model("rnn", train, TrainConfig(epochs=30, seed=0), RnnConfig())

# %%
# One chunk of 20 steps, side by side.
starts, truth, gen = generate_future(tdlgm.model(), test.values, 20, rng=0)
for t, g in zip(truth[0], gen[0]):
    print(f"{t:.3f}  {g:.3f}")

# %%
# Overlap scores per horizon. A flat curve means the rollout keeps the
# shape of the data as it runs further out.
for name, cp in (("tdlgm", tdlgm), ("rnn", rnn)):
    scores = horizon_scores(cp.model(), test.values, seed=0)
    print(name, {k: round(v, 1) for k, v in scores.items()}, "range", round(max(scores.values()) - min(scores.values()), 2))
