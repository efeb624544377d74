"""
Checking the autodiff engine
============================

Reverse-mode gradients against central differences, first on a single LSTM
step and then on the full TDLGM loss for one short segment.
"""

# %%
import numpy as np

from tdlgm import autodiff as ad
from tdlgm.generator import TdlgmConfig, TdlgmModel
from tdlgm.loss import draw_noise, tdlgm_loss_graph
from tdlgm.nn import LayerState, LstmBlock, init_params, lstm_step

# %%
# One LSTM step. Inputs and states are treated as parameters too.
rng = np.random.default_rng(0)
p = dict(init_params([LstmBlock("cell", 2, 3)], 0))
p.update(x=rng.normal(size=(1, 2)), h=rng.normal(size=(1, 3)), c=rng.normal(size=(1, 3)))
err = ad.grad_check(lambda q: ad.sum(lstm_step(q, "cell", q["x"], LayerState(q["h"], q["c"])).hidden), p)
print(f"lstm_step    max relative error {err:.2e}")

# %%
# The whole surrogate loss. Noise is drawn once up front so the loss is a
# deterministic function of the parameters.
cfg = TdlgmConfig(layers=3, hidden=3, latent=2, window_m=3, out_hidden=(3,), rec_hidden=3)
model = TdlgmModel.init(cfg, 0)
segment = rng.uniform(size=cfg.window_m + 5)
noise = draw_noise(cfg, segment.size, rng)
err = ad.grad_check(lambda q: tdlgm_loss_graph(q, cfg, segment, noise, 1000.0, 1e-4)[0], model.params)
print(f"total loss   max relative error {err:.2e}  ({model.params.num_values()} coordinates)")
