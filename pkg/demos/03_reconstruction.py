"""
Imputing a noisy trace
======================

Corrupt a fraction of the test points and reconstruct them with TDLGM, the
history-windowed DLGM and the LSTM predictor.
"""

# %%
import numpy as np

from tdlgm.baselines import RnnConfig
from tdlgm.data import split, synth_series
from tdlgm.evaluation import reconstruct, reconstruction_stats
from tdlgm.generator import DlgmConfig
from tdlgm.train import TrainConfig, inject_noise, train_model

train, test = split(synth_series("regime_switch", 2048, 0), 0.8)
noisy = inject_noise(test, 0.3, 0.01, np.random.default_rng(1))
print("corrupted points:", int(np.sum(noisy.values != test.values)))

# %%
models = {
    "tdlgm": None,
    "dlgm": DlgmConfig(history=8),
    "rnn": RnnConfig(),
}
for kind, arch in models.items():
    cp, _ = train_model(kind, train, TrainConfig(epochs=30, seed=0), arch)
    s = reconstruction_stats(test.values, reconstruct(cp.model(), noisy.values))
    print(f"{kind:6s} mean {s.mean:+.4f}  variance {s.variance:.5f}  mse {s.mse:.5f}")
