import numpy as np
import pytest

from mbsr import network
from mbsr.network import (SrModel, SrModelConfig, depth_to_space, forward, init_model,
                          loss_and_gradients, param_layout, parameter_count, predict,
                          space_to_depth)
from gradcheck import fd_gradient_check, make_margin_targets
from oracles import naive_depth_to_space, naive_model_forward

TINY = SrModelConfig(in_channels=2, features=4, blocks=1, attention_reduction=2, dtype="float64")


def rand_input(shape, seed=0):
    return np.random.default_rng(seed).random(shape)


def test_init_deterministic_bitwise():
    a = init_model(TINY, seed=3)
    b = init_model(TINY, seed=3)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])
    c = init_model(TINY, seed=4)
    assert any(not np.array_equal(a.params[k], c.params[k]) for k in a.params)


def test_init_biases_zero_and_bounds():
    m = init_model(SrModelConfig(in_channels=3, features=16, blocks=2, dtype="float64"), seed=0)
    for name, shape, fan_in in param_layout(m.config):
        p = m.params[name]
        assert p.shape == tuple(shape)
        if fan_in is None:
            assert np.array_equal(p, np.zeros(shape))
        else:
            bound = np.sqrt(6.0 / fan_in)
            if name.endswith("gate.w2"):
                bound *= 0.1
            assert np.abs(p).max() <= bound


def test_gate_output_layer_scaled_down():
    m = init_model(SrModelConfig(in_channels=1, features=16, blocks=1, dtype="float64"), seed=5)
    w2 = m.params["block0.gate.w2"]
    w1 = m.params["block0.gate.w1"]
    # same fan-in family, one is a tenth of the usual magnitude
    assert np.abs(w2).max() < 0.2 * np.sqrt(6.0 / w2.shape[1])
    assert np.abs(w1).max() > 0.5 * np.sqrt(6.0 / w1.shape[1])


def test_parameter_count_closed_form():
    for c, f, b, r in ((1, 8, 1, 2), (3, 16, 3, 4), (4, 32, 5, 8)):
        cfg = SrModelConfig(in_channels=c, features=f, blocks=b, attention_reduction=r)
        per_block = 2 * (f * f * 9 + f) + f * (f // r) + f // r + (f // r) * f + f
        expected = (c * f * 9 + f) + b * per_block + 2 * (f * 4 * f * 9 + 4 * f) + (f * 9 + 1)
        assert parameter_count(cfg) == expected
        m = init_model(cfg, seed=0)
        assert sum(p.size for p in m.params.values()) == expected


def test_parameter_count_head_only_depends_on_channels():
    f = 16
    c1 = parameter_count(SrModelConfig(in_channels=1, features=f, blocks=2))
    c3 = parameter_count(SrModelConfig(in_channels=3, features=f, blocks=2))
    assert c3 - c1 == (3 - 1) * f * 9


def test_forward_shape_contract():
    m = init_model(SrModelConfig(in_channels=3, features=8, blocks=2, attention_reduction=4), seed=1)
    y = forward(m, rand_input((2, 3, 16, 16)))
    assert y.shape == (2, 1, 64, 64)
    y8 = forward(m, rand_input((1, 3, 8, 8)))
    assert y8.shape == (1, 1, 32, 32)


def test_forward_rejects_bad_input():
    m = init_model(TINY, seed=0)
    with pytest.raises(ValueError, match="expected input"):
        forward(m, rand_input((2, 3, 16, 16)))
    bad = rand_input((1, 2, 16, 16))
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        forward(m, bad)


def test_zero_tail_gives_zero_output():
    m = init_model(TINY, seed=2)
    m.params["tail.w"][:] = 0.0
    m.params["tail.b"][:] = 0.0
    y = forward(m, rand_input((1, 2, 16, 16)))
    assert np.array_equal(y, np.zeros_like(y))


def test_forward_deterministic_and_pure():
    m = init_model(TINY, seed=9)
    x = rand_input((2, 2, 16, 16), seed=4)
    y1 = forward(m, x)
    y2 = forward(m, x)
    assert np.array_equal(y1, y2)


def test_predict_clamps_only():
    m = init_model(TINY, seed=11)
    x = rand_input((1, 2, 16, 16), seed=5)
    raw = forward(m, x)
    clamped = predict(m, x)
    assert clamped.min() >= 0.0 and clamped.max() <= 1.0
    inside = (raw >= 0.0) & (raw <= 1.0)
    assert np.array_equal(clamped[inside], raw[inside])


def test_forward_matches_straight_line_reference():
    m = init_model(TINY, seed=21)
    x = rand_input((3, 2, 16, 16), seed=6)
    fast = forward(m, x)
    for n in range(3):
        slow = naive_model_forward(m.params, m.config.blocks, x[n])
        assert np.max(np.abs(fast[n, 0] - slow[0])) <= 1e-6


def test_depth_to_space_matches_reference_and_inverts():
    x = rand_input((2, 16, 5, 7), seed=7)
    y = depth_to_space(x, 2)
    assert y.shape == (2, 4, 10, 14)
    for n in range(2):
        assert np.array_equal(y[n], naive_depth_to_space(x[n], 2))
    assert np.array_equal(space_to_depth(y, 2), x)


def test_depth_to_space_twice_composes_to_x4():
    x = rand_input((1, 16, 4, 4), seed=8)
    two_stage = depth_to_space(depth_to_space(x, 2), 2)
    assert two_stage.shape == (1, 1, 16, 16)
    # the composition is one x4 shuffle with regrouped channels: stage 1
    # contributes the coarse offset (i1, j1), stage 2 the fine offset
    # (i2, j2), and the source channel is (i2*2 + j2)*4 + (i1*2 + j1)
    direct = np.zeros((1, 1, 16, 16))
    for i1 in range(2):
        for j1 in range(2):
            for i2 in range(2):
                for j2 in range(2):
                    ch = (i2 * 2 + j2) * 4 + (i1 * 2 + j1)
                    direct[0, 0, 2 * i1 + i2 :: 4, 2 * j1 + j2 :: 4] = x[0, ch]
    assert np.array_equal(two_stage, direct)


def test_loss_zero_when_target_equals_output():
    m = init_model(TINY, seed=13)
    x = rand_input((2, 2, 16, 16), seed=9)
    tgt = forward(m, x)
    loss, grads = loss_and_gradients(m, x, tgt)
    assert loss == 0.0
    assert all(np.array_equal(g, np.zeros_like(g)) for g in grads.values())


def test_loss_change_under_target_shift():
    m = init_model(TINY, seed=14)
    x = rand_input((2, 2, 16, 16), seed=10)
    tgt = forward(m, x) - 0.5  # residuals exactly +0.5 everywhere
    loss, _ = loss_and_gradients(m, x, tgt)
    assert loss == pytest.approx(0.5, abs=1e-12)
    loss2, _ = loss_and_gradients(m, x, 2.0 * tgt - forward(m, x))  # residual doubles
    assert loss2 == pytest.approx(1.0, abs=1e-12)


def test_loss_reports_nonfinite_sample():
    m = init_model(TINY, seed=15)
    x = rand_input((2, 2, 16, 16), seed=11)
    tgt = forward(m, x)
    tgt[1] += np.inf
    with pytest.raises(FloatingPointError, match=r"\[1\]"):
        loss_and_gradients(m, x, tgt)


def test_gradients_match_finite_differences_tiny():
    m = init_model(TINY, seed=17)
    x = rand_input((2, 2, 16, 16), seed=12)
    tgt = make_margin_targets(m, x, seed=13)
    worst = fd_gradient_check(m, x, tgt, list(m.params), n_per_tensor=6, h=1e-4, seed=14)
    assert worst <= 1e-4


def test_config_validation():
    with pytest.raises(ValueError, match="divisible"):
        SrModelConfig(features=10, attention_reduction=4)
    with pytest.raises(ValueError, match="scale"):
        SrModelConfig(scale=2)
    with pytest.raises(ValueError, match="dtype"):
        SrModelConfig(dtype="float16")
    with pytest.raises(ValueError, match="in_channels"):
        SrModelConfig(in_channels=0)


def test_model_copy_and_astype():
    m = init_model(SrModelConfig(in_channels=1, features=8, blocks=1, attention_reduction=4,
                                 dtype="float32"), seed=1)
    m64 = m.astype("float64")
    assert m64.config.dtype == "float64"
    assert m64.params["head.w"].dtype == np.float64
    c = m.copy()
    c.params["head.w"][0, 0, 0, 0] += 1.0
    assert m.params["head.w"][0, 0, 0, 0] != c.params["head.w"][0, 0, 0, 0]
