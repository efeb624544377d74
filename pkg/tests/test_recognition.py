import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tdlgm import autodiff as ad
from tdlgm.autodiff import ShapeError
from tdlgm.generator import TdlgmConfig, TdlgmModel
from tdlgm.recognition import (
    COV_FLOOR,
    GaussianSpec,
    causal_windows,
    latent_recognize,
    pad_window,
    recognize_state,
    reparam_sample,
)


def test_zero_params_give_softplus_floor(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 0)
    p = {k: np.zeros_like(v) for k, v in model.params.items()}
    for spec in latent_recognize(p, small_tdlgm, [0.3, 0.9]):
        np.testing.assert_array_equal(spec.mu.value, np.zeros((2, 2)))
        np.testing.assert_allclose(spec.diag_cov.value, np.log(2.0) + COV_FLOOR)


@given(st.integers(0, 10_000))
def test_latent_recognition_matches_oracle(seed):
    cfg = TdlgmConfig(layers=3, hidden=3, latent=2, window_m=3, out_hidden=(3,), rec_hidden=3)
    model = TdlgmModel.init(cfg, seed)
    p = dict(model.params)
    p["qrec.b0"] = np.random.default_rng(seed).normal(size=p["qrec.b0"].shape) * 30  # exercise softplus tails
    v = np.random.default_rng(seed).uniform(size=4)
    got = latent_recognize(p, cfg, v)
    for spec, (mu, cov) in zip(got, oracles.latent_posterior(p, 3, 2, v)):
        np.testing.assert_allclose(spec.mu.value, mu, rtol=1e-12)
        np.testing.assert_allclose(spec.diag_cov.value, cov, rtol=1e-12)
        assert np.all(spec.diag_cov.value > 0)


def test_reparam_sample_statistics():
    spec = GaussianSpec(ad.constant(np.full((200_000, 1), 0.7)), ad.constant(np.full((200_000, 1), 0.25)))
    x = reparam_sample(spec, np.random.default_rng(0)).value
    assert abs(x.mean() - 0.7) < 0.005
    assert abs(x.var() - 0.25) < 0.005


def test_reparam_frozen_eps_and_errors():
    spec = GaussianSpec(ad.constant([[1.0, 2.0]]), ad.constant([[4.0, 9.0]]))
    np.testing.assert_allclose(reparam_sample(spec, eps=[[1.0, -1.0]]).value, [[3.0, -1.0]])
    with pytest.raises(ValueError):
        reparam_sample(spec)
    with pytest.raises(ShapeError):
        reparam_sample(spec, eps=[[1.0]])


def test_reparam_gradients(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 1)
    q = model.params.subset("qrec")
    eps = [np.random.default_rng(l).standard_normal((3, 2)) for l in range(3)]
    v = np.array([0.1, 0.5, 0.8])

    def loss(p):
        specs = latent_recognize(p, small_tdlgm, v)
        total = ad.sum(ad.square(reparam_sample(specs[0], eps=eps[0])))
        for spec, e in zip(specs[1:], eps[1:]):
            total = total + ad.sum(ad.tanh(reparam_sample(spec, eps=e)))
        return total

    assert ad.grad_check(loss, q) < 1e-3


def test_pad_window_rules():
    np.testing.assert_array_equal(pad_window([0.2, 0.3], 4), [0.5, 0.5, 0.2, 0.3])
    np.testing.assert_array_equal(pad_window([0.2], 2, pad_value=0.0), [0.0, 0.2])
    with pytest.raises(ValueError):
        pad_window([], 3)
    with pytest.raises(ShapeError):
        pad_window([0.1, 0.2, 0.3], 2)


def test_causal_windows_exclude_current_value():
    series = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    w = causal_windows(series, [0, 2, 5], 3)
    np.testing.assert_array_equal(w, [[0.5, 0.5, 0.5], [0.5, 0.1, 0.2], [0.3, 0.4, 0.5]])
    with pytest.raises(IndexError):
        causal_windows(series, [6], 3)


def test_short_window_equals_explicitly_padded(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 2)
    a = recognize_state(model.params, small_tdlgm, [0.9])
    b = recognize_state(model.params, small_tdlgm, np.array([[0.5, 0.5, 0.9]]))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.hidden.value, y.hidden.value)
        np.testing.assert_array_equal(x.cell.value, y.cell.value)


@given(st.integers(0, 10_000))
def test_state_recognition_matches_oracle_and_bounds(seed):
    cfg = TdlgmConfig(layers=3, hidden=3, latent=2, window_m=3, out_hidden=(3,), rec_hidden=3)
    model = TdlgmModel.init(cfg, seed)
    w = np.random.default_rng(seed).uniform(size=(5, 3))
    got = recognize_state(model.params, cfg, w)
    assert len(got) == cfg.layers - 1
    for s, (h, c) in zip(got, oracles.state_recognition(model.params, 3, 3, w)):
        np.testing.assert_allclose(s.hidden.value, h, rtol=1e-12)
        np.testing.assert_allclose(s.cell.value, c, rtol=1e-12)
        assert np.all(np.abs(s.hidden.value) <= 1.0)


def test_state_recognition_width_error(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 0)
    with pytest.raises(ShapeError):
        recognize_state(model.params, small_tdlgm, np.ones((2, 5)))
