import math

import numpy as np
import pytest

from mbsr.dataset import MisrSample
from mbsr.network import SrModelConfig, forward, init_model
from mbsr.training import (AdamState, TrainConfig, TrainingDiverged, adam_step,
                           cosine_lr, init_adam, load_checkpoint, save_checkpoint,
                           save_history, train, validation_loss)

CFG = TrainConfig(lr_max=1e-4, lr_min=1e-7, max_iters=1000, val_every=10,
                  patience=10, batch_size=4, seed=0)


def tiny_model(seed=0, dtype="float64", channels=1):
    return init_model(SrModelConfig(in_channels=channels, features=4, blocks=1,
                                    attention_reduction=2, dtype=dtype), seed=seed)


def make_samples(n, channels=1, seed=0, target_from=None):
    gen = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        x = gen.random((channels, 16, 16))
        if target_from is not None:
            y = forward(target_from, x[None])[0, 0]
            y = np.clip(y, 0.0, 1.0)
        else:
            y = gen.random((64, 64))
        samples.append(MisrSample(patch_id=i, compounds=("iso",), input=x, target=y))
    return samples


# ---------------------------------------------------------------------------
# Scheduler

def test_cosine_endpoints_exact():
    assert cosine_lr(0, CFG) == 1e-4
    assert cosine_lr(CFG.max_iters, CFG) == 1e-7


def test_cosine_midpoint():
    assert cosine_lr(CFG.max_iters // 2, CFG) == pytest.approx((1e-4 + 1e-7) / 2, rel=1e-12)


def test_cosine_monotone_and_bounded():
    grid = np.linspace(0, CFG.max_iters, 1001).astype(int)
    vals = [cosine_lr(int(t), CFG) for t in grid]
    assert all(b <= a + 1e-20 for a, b in zip(vals, vals[1:]))
    assert all(CFG.lr_min <= v <= CFG.lr_max for v in vals)


def test_cosine_rejects_out_of_range():
    with pytest.raises(ValueError):
        cosine_lr(-1, CFG)
    with pytest.raises(ValueError):
        cosine_lr(CFG.max_iters + 1, CFG)


def test_train_config_validation():
    with pytest.raises(ValueError, match="lr_min"):
        TrainConfig(lr_max=1e-7, lr_min=1e-4)
    with pytest.raises(ValueError, match="patience"):
        TrainConfig(patience=0)
    with pytest.raises(ValueError, match="loss"):
        TrainConfig(loss="l2")


# ---------------------------------------------------------------------------
# Adam

def test_adam_zero_gradient_is_noop():
    m = tiny_model()
    state = init_adam(m)
    before = {k: v.copy() for k, v in m.params.items()}
    adam_step(state, m.params, {k: np.zeros_like(v) for k, v in m.params.items()}, lr=0.1)
    for k in before:
        assert np.array_equal(before[k], m.params[k])


def test_adam_first_step_closed_form():
    params = {"p": np.array([1.0])}
    state = AdamState(m={"p": np.zeros(1)}, v={"p": np.zeros(1)})
    adam_step(state, params, {"p": np.array([1.0])}, lr=0.1)
    expected_step = 0.1 * (1.0 / (math.sqrt(1.0) + state.eps))
    assert params["p"][0] == pytest.approx(1.0 - expected_step, rel=1e-12)
    assert state.t == 1


def test_adam_constant_gradient_direction():
    params = {"p": np.array([0.0])}
    state = AdamState(m={"p": np.zeros(1)}, v={"p": np.zeros(1)})
    for _ in range(20):
        adam_step(state, params, {"p": np.array([1.0])}, lr=0.1)
    # with a constant unit gradient every bias-corrected step is ~ -lr
    assert params["p"][0] == pytest.approx(-2.0, rel=1e-6)


def test_adam_rejects_nonfinite_gradient():
    m = tiny_model()
    state = init_adam(m)
    grads = {k: np.zeros_like(v) for k, v in m.params.items()}
    grads["head.w"][0, 0, 0, 0] = np.nan
    with pytest.raises(FloatingPointError, match="head.w"):
        adam_step(state, m.params, grads, lr=0.1)


def test_adam_trajectories_identical():
    results = []
    for _ in range(2):
        m = tiny_model(seed=1)
        state = init_adam(m)
        samples = make_samples(8, seed=2)
        from mbsr.dataset import stack_batch
        from mbsr.network import loss_and_gradients
        x, y = stack_batch(samples)
        for t in range(5):
            _, grads = loss_and_gradients(m, x, y)
            adam_step(state, m.params, grads, lr=1e-3)
        results.append({k: v.copy() for k, v in m.params.items()})
    for k in results[0]:
        assert np.array_equal(results[0][k], results[1][k])


# ---------------------------------------------------------------------------
# Training loop

def test_train_patience_stops_at_exact_iteration():
    # lr_max ~ 0 freezes the parameters, so every validation equals the
    # first: best point at iteration val_every, stop patience*val_every later
    cfg = TrainConfig(lr_max=1e-30, lr_min=1e-33, max_iters=10_000, val_every=10,
                      patience=10, batch_size=4, seed=0)
    m = tiny_model()
    samples = make_samples(8)
    best, history = train(m, samples, samples[:4], cfg)
    assert history[-1].iteration == cfg.val_every + cfg.patience * cfg.val_every
    assert len(history) == 11


def test_train_returns_argmin_of_history():
    cfg = TrainConfig(lr_max=2e-3, lr_min=1e-5, max_iters=60, val_every=10,
                      patience=100, batch_size=8, seed=1)
    teacher = tiny_model(seed=99)
    samples = make_samples(16, seed=3, target_from=teacher)
    m = tiny_model(seed=1)
    best, history = train(m, samples[:12], samples[12:], cfg)
    best_row = min(history, key=lambda r: r.val_loss)
    assert validation_loss(best, samples[12:], cfg.batch_size) == pytest.approx(
        best_row.val_loss, rel=1e-12)


def test_train_loss_decreases_on_learnable_data():
    cfg = TrainConfig(lr_max=2e-3, lr_min=1e-5, max_iters=150, val_every=25,
                      patience=100, batch_size=8, seed=2)
    teacher = tiny_model(seed=42)
    samples = make_samples(16, seed=4, target_from=teacher)
    m = tiny_model(seed=7)
    best, history = train(m, samples[:12], samples[12:], cfg)
    assert history[-1].train_loss < history[0].train_loss
    assert min(r.val_loss for r in history) <= history[0].val_loss


def test_train_determinism():
    cfg = TrainConfig(lr_max=1e-3, lr_min=1e-5, max_iters=10, val_every=5,
                      patience=10, batch_size=4, seed=5)
    runs = []
    for _ in range(2):
        m = tiny_model(seed=6)
        samples = make_samples(10, seed=5)
        best, history = train(m, samples[:8], samples[8:], cfg)
        runs.append((best, [(r.iteration, r.train_loss, r.val_loss, r.lr) for r in history]))
    assert runs[0][1] == runs[1][1]
    for k in runs[0][0].params:
        assert np.array_equal(runs[0][0].params[k], runs[1][0].params[k])


def test_train_divergence_carries_history():
    cfg = TrainConfig(lr_max=1e-3, lr_min=1e-5, max_iters=50, val_every=10,
                      patience=10, batch_size=4, seed=0)
    m = tiny_model(seed=8)
    samples = make_samples(8, seed=6)
    m.params["tail.w"][:] = np.inf  # forces a non-finite loss immediately
    with np.errstate(invalid="ignore"):
        with pytest.raises(TrainingDiverged) as exc:
            train(m, samples[:6], samples[6:], cfg)
    assert exc.value.history == []


def test_train_rejects_empty_sets():
    m = tiny_model()
    with pytest.raises(ValueError, match="nonempty"):
        train(m, [], make_samples(2), CFG)


# ---------------------------------------------------------------------------
# Persistence

def test_checkpoint_round_trip(tmp_path):
    m = tiny_model(seed=13, dtype="float32")
    state = init_adam(m)
    state.t = 7
    state.m["head.w"] += 0.5
    path = tmp_path / "model.mbck"
    save_checkpoint(path, m, state, iteration=123)
    back, back_state, iteration = load_checkpoint(path)
    assert iteration == 123
    assert back.config == m.config
    for k in m.params:
        assert np.array_equal(back.params[k], m.params[k])
        assert back.params[k].dtype == m.params[k].dtype
    assert back_state.t == 7
    assert np.array_equal(back_state.m["head.w"], state.m["head.w"])
    x = np.random.default_rng(0).random((1, 1, 16, 16))
    assert np.array_equal(forward(back, x), forward(m, x))


def test_checkpoint_bytes_deterministic(tmp_path):
    m = tiny_model(seed=14)
    p1, p2 = tmp_path / "a.mbck", tmp_path / "b.mbck"
    save_checkpoint(p1, m, iteration=5)
    save_checkpoint(p2, m.copy(), iteration=5)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_without_optimizer(tmp_path):
    m = tiny_model(seed=15)
    path = tmp_path / "m.mbck"
    save_checkpoint(path, m)
    back, state, iteration = load_checkpoint(path)
    assert state is None and iteration == 0


def test_history_csv(tmp_path):
    from mbsr.training import HistoryRow
    rows = [HistoryRow(10, 0.5, 0.6, 1e-4), HistoryRow(20, 0.4, 0.55, 9e-5)]
    path = tmp_path / "history.csv"
    save_history(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,train_loss,val_loss,lr"
    assert lines[1].startswith("10,0.5")
    assert len(lines) == 3
