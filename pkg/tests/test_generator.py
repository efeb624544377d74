import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tdlgm import autodiff as ad
from tdlgm.autodiff import ShapeError
from tdlgm.generator import (
    DlgmConfig,
    DlgmModel,
    TdlgmConfig,
    TdlgmModel,
    dlgm_generate,
    generate_step,
    rollout,
    sample_latent,
)
from tdlgm.nn import LayerState


def random_states(cfg, n, rng):
    return [
        LayerState(ad.constant(np.tanh(rng.normal(size=(n, cfg.hidden)))), ad.constant(rng.normal(size=(n, cfg.hidden))))
        for _ in range(cfg.layers - 1)
    ]


def test_config_validation():
    with pytest.raises(ValueError):
        TdlgmConfig(layers=1)
    with pytest.raises(ValueError):
        TdlgmConfig(sigma_out=0.0)
    with pytest.raises(ValueError):
        DlgmConfig(history=-1)


def test_parameter_layout_names(small_tdlgm):
    names = set(TdlgmModel.init(small_tdlgm, 0).params)
    assert {"gen.G1", "gen.G2", "gen.G3", "gen.R1.W", "gen.R2.b", "gen.T0.W0", "qrec.W0", "srec1.W0", "srec2.b1"} <= names
    assert "gen.R3.W" not in names


def test_sample_latent_moments():
    cfg = TdlgmConfig(layers=2, latent=3)
    xi = sample_latent(cfg, np.random.default_rng(0), 100_000)
    for x in xi:
        assert np.all(np.abs(x.mean(0)) < 0.02)
        assert np.all(np.abs(x.var(0) - 1.0) < 0.05)


@given(st.integers(0, 10_000))
def test_generate_step_matches_oracle(seed):
    cfg = TdlgmConfig(layers=3, hidden=4, latent=2, window_m=3, out_hidden=(3,), rec_hidden=3)
    model = TdlgmModel.init(cfg, seed)
    rng = np.random.default_rng(seed)
    states = random_states(cfg, 2, rng)
    xi = sample_latent(cfg, rng, 2)
    v, new, h = generate_step(model.params, cfg, states, xi)
    v_ref, new_ref, h_ref = oracles.tdlgm_step(
        model.params, cfg.layers, [(s.hidden.value, s.cell.value) for s in states], xi
    )
    np.testing.assert_allclose(v.value, v_ref, rtol=1e-12)
    for a, (bh, bc) in zip(new, new_ref):
        np.testing.assert_allclose(a.hidden.value, bh, rtol=1e-12)
        np.testing.assert_allclose(a.cell.value, bc, rtol=1e-12)
    for a, b in zip(h, h_ref):
        np.testing.assert_allclose(a.value, b, rtol=1e-12)


def test_top_latent_perturbation_reaches_every_layer(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 3)
    rng = np.random.default_rng(3)
    states = random_states(small_tdlgm, 1, rng)
    zeros = [np.zeros((1, small_tdlgm.latent))] * small_tdlgm.layers
    bumped = list(zeros)
    bumped[-1] = np.ones((1, small_tdlgm.latent))
    _, _, h0 = generate_step(model.params, small_tdlgm, states, zeros)
    _, _, h1 = generate_step(model.params, small_tdlgm, states, bumped)
    for a, b in zip(h0, h1):
        assert np.all(a.value != b.value)


def test_state_updates_when_input_nonzero(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 5)
    rng = np.random.default_rng(5)
    states = random_states(small_tdlgm, 1, rng)
    _, new, _ = generate_step(model.params, small_tdlgm, states, sample_latent(small_tdlgm, rng))
    for a, b in zip(states, new):
        assert not np.allclose(a.hidden.value, b.hidden.value)
        assert not np.allclose(a.cell.value, b.cell.value)


def test_deterministic_mode_repeatable_and_sampled_noise(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 1)
    rng = np.random.default_rng(1)
    states = random_states(small_tdlgm, 4, rng)
    xi = sample_latent(small_tdlgm, rng, 4)
    a, _, _ = generate_step(model.params, small_tdlgm, states, xi)
    b, _, _ = generate_step(model.params, small_tdlgm, states, xi)
    np.testing.assert_array_equal(a.value, b.value)
    c, _, _ = generate_step(model.params, small_tdlgm, states, xi, np.random.default_rng(9))
    noise = c.value - a.value
    np.testing.assert_allclose(noise, small_tdlgm.sigma_out * np.random.default_rng(9).standard_normal((4, 1)))


def test_generate_step_shape_errors(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 0)
    states = random_states(small_tdlgm, 1, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        generate_step(model.params, small_tdlgm, states[:1], sample_latent(small_tdlgm, np.random.default_rng(0)))
    with pytest.raises(ShapeError):
        generate_step(model.params, small_tdlgm, states, [np.zeros((1, 5))] * small_tdlgm.layers)


def test_generate_step_gradients_wrt_generator(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 2)
    rng = np.random.default_rng(2)
    states = [(np.tanh(rng.normal(size=(2, 3))), rng.normal(size=(2, 3))) for _ in range(2)]
    xi = sample_latent(small_tdlgm, rng, 2)
    gen = {k: v for k, v in model.params.items() if k.startswith("gen.")}

    def loss(p):
        st_ = [LayerState(ad.constant(h), ad.constant(c)) for h, c in states]
        v, new, _ = generate_step(p, small_tdlgm, st_, xi)
        return ad.sum(ad.square(v)) + ad.sum(new[0].cell) + ad.sum(new[1].hidden)

    assert ad.grad_check(loss, gen) < 1e-3


def test_rollout_one_step_equals_generate_step(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 4)
    states = random_states(small_tdlgm, 3, np.random.default_rng(4))
    zeros = [np.zeros((3, small_tdlgm.latent))] * small_tdlgm.layers
    v, _, _ = generate_step(model.params, small_tdlgm, states, zeros)
    out = rollout(model.params, small_tdlgm, states, 1, mode="mean")
    np.testing.assert_array_equal(out[:, 0], np.clip(v.value[:, 0], 0, 1))


def test_rollout_mean_is_pure_and_sampled_is_clamped(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 6)
    states = random_states(small_tdlgm, 2, np.random.default_rng(6))
    a = rollout(model.params, small_tdlgm, states, 12, mode="mean")
    b = rollout(model.params, small_tdlgm, states, 12, mode="mean")
    np.testing.assert_array_equal(a, b)
    p = dict(model.params)
    p["gen.T0.b1"] = np.array([2.0])  # push the mean well outside [0, 1]
    s = rollout(p, small_tdlgm, states, 20, np.random.default_rng(0), mode="sampled")
    assert s.shape == (2, 20) and s.min() >= 0.0 and s.max() <= 1.0


def test_rollout_argument_errors(small_tdlgm):
    model = TdlgmModel.init(small_tdlgm, 0)
    states = random_states(small_tdlgm, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        rollout(model.params, small_tdlgm, states, 0)
    with pytest.raises(ValueError):
        rollout(model.params, small_tdlgm, states, 3, mode="sampled")


def test_dlgm_zero_weights_give_bias_chain(small_dlgm):
    model = DlgmModel.init(small_dlgm, 0)
    p = {k: np.zeros_like(v) for k, v in model.params.items()}
    p["gen.T0.b1"] = np.array([0.3])
    v = dlgm_generate(p, small_dlgm, [np.zeros((2, 2))] * 3, np.ones((2, 3)))
    np.testing.assert_array_equal(v.value, np.full((2, 1), 0.3))


@given(st.integers(0, 10_000), st.sampled_from([0, 3]))
def test_dlgm_matches_oracle(seed, w):
    cfg = DlgmConfig(layers=3, hidden=4, latent=2, history=w, out_hidden=(3,))
    model = DlgmModel.init(cfg, seed)
    rng = np.random.default_rng(seed)
    xi = sample_latent(cfg, rng, 2)
    hist = rng.uniform(size=(2, w))
    np.testing.assert_allclose(
        dlgm_generate(model.params, cfg, xi, hist).value, oracles.dlgm_forward(model.params, 3, xi, hist), rtol=1e-12
    )


def test_dlgm_history_mismatch(small_dlgm):
    model = DlgmModel.init(small_dlgm, 0)
    with pytest.raises(ShapeError):
        dlgm_generate(model.params, small_dlgm, [np.zeros((1, 2))] * 3, np.ones((1, 2)))
