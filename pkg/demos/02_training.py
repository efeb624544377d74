"""
Training a TDLGM
================

Fit the default model on a synthetic regime-switching trace and watch the
loss terms fall.
"""

# %%
import numpy as np

from tdlgm.data import split, synth_series
from tdlgm.train import TrainConfig, train_model

train, test = split(synth_series("regime_switch", 2048, 0), 0.8)
print(len(train), "training points,", len(test), "test points")

# %%
cp, trace = train_model("tdlgm", train, TrainConfig(epochs=30, seed=0))
for b in trace[::5] + trace[-1:]:
    print(f"kl {b.kl_latent:8.3f}  state {b.state_mse:.5f}  nll {b.nll_recon:9.3f}  total {b.total:9.3f}")

# %%
# A 10-epoch moving average smooths out the noise of single-sample training.
totals = np.array([b.total for b in trace])
print(np.round(np.convolve(totals, np.ones(10) / 10, "valid"), 2))
