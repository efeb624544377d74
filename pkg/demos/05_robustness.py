"""
Robustness to input noise
=========================

Train on clean data, then reconstruct test data corrupted at every point
with growing Gaussian noise.
"""

# %%
from tdlgm.data import split, synth_series
from tdlgm.evaluation import ROBUSTNESS_VARIANCES, robustness_sweep
from tdlgm.train import TrainConfig, train_model

train, test = split(synth_series("regime_switch", 2048, 0), 0.8)
cp, _ = train_model("tdlgm", train, TrainConfig(epochs=30, seed=0))

# %%
for var, s in robustness_sweep(cp.model(), test, (0.0, *ROBUSTNESS_VARIANCES), rng=0):
    print(f"var {var:.4f}  mean {s.mean:+.4f}  variance {s.variance:.5f}  mse {s.mse:.5f}")
