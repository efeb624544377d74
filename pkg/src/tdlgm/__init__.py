"""Time-series deep latent Gaussian model (TDLGM) with baselines and evaluation.

Modules
-------
autodiff    reverse-mode engine over numpy arrays
nn          MLP and LSTM blocks, initialization
generator   TDLGM / DLGM generative passes and rollout
recognition latent posterior and state recognizer
loss        surrogate loss terms
baselines   LSTM predictor and history-windowed DLGM helpers
train       noise injection, Adam, training loop, checkpoints
evaluation  overlap score, reconstruction stats, robustness, t-test filter
data        CSV ingestion, normalization, splits, synthetic series
cli         batch command-line front end (``python -m tdlgm``)
"""

__version__ = "0.1.0"
