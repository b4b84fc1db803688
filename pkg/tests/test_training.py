import inspect
import math

import numpy as np
import pytest

from gwlcast.data import Normalizer, SupervisedDataset, TimeSeriesFrame
from gwlcast.training import (
    AdamState,
    ModelSizes,
    SplitSpec,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    chronological_split,
    dataset_loss,
    mse_loss,
    train_model,
)

UNIT = Normalizer((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def dataset(past, future, targets):
    n, lookback, _ = past.shape
    return SupervisedDataset(
        np.ascontiguousarray(past), np.ascontiguousarray(future), np.ascontiguousarray(targets),
        np.zeros(n, dtype=np.int64), np.arange(n, dtype=np.int64), lookback, future.shape[1], UNIT,
    )


def linear_task(seed, n=64, lookback=3):
    """Target is an exact linear function of the last observed row."""
    rng = np.random.default_rng(seed)
    past = rng.uniform(0, 1, (n, lookback, 3))
    future = rng.uniform(0, 1, (n, 1, 2))
    targets = (0.1 + 0.3 * past[:, -1, 0] + 0.4 * past[:, -1, 2])[:, None]
    return dataset(past, future, targets)


def constant_task(value, seed, n=20):
    rng = np.random.default_rng(seed)
    return dataset(rng.uniform(0, 1, (n, 3, 3)), rng.uniform(0, 1, (n, 2, 2)), np.full((n, 2), value))


def frame(n):
    ts = np.datetime64("2020-01-01T00", "h") + np.arange(n).astype("timedelta64[h]")
    return TimeSeriesFrame("w", ts, np.zeros(n), np.zeros(n), np.arange(n, dtype=float))


def test_mse_examples():
    assert mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse_loss([0, 0], [3, 4]) == 12.5
    t = np.array([0.3, -1.2, 4.0])
    assert mse_loss(t + 0.25, t) == pytest.approx(0.0625, abs=1e-15)
    with pytest.raises(ValueError):
        mse_loss([1.0], [1.0, 2.0])


def test_adam_zero_gradient_leaves_params():
    p = np.array([0.5, -1.0, 2.0])
    new, state = adam_step(p, np.zeros(3), AdamState.zeros(3), TrainConfig(), 1)
    assert np.array_equal(new, p)


@pytest.mark.parametrize("g", [0.37, -2.5, 1e-4])
def test_adam_first_step_hand_evaluation(g):
    cfg = TrainConfig()
    new, state = adam_step(np.array([0.0]), np.array([g]), AdamState.zeros(1), cfg, 1)
    # m_hat = g, v_hat = g^2 after bias correction
    expected = -cfg.learning_rate * g / (abs(g) + cfg.adam_eps)
    assert new[0] == pytest.approx(expected, rel=1e-12)
    assert abs(abs(new[0]) - cfg.learning_rate) < 1e-6
    assert state.m[0] == pytest.approx(0.1 * g) and state.v[0] == pytest.approx(0.001 * g * g)


def test_adam_rejects_bad_step_and_shapes():
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(2), AdamState.zeros(2), TrainConfig(), 0)
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), TrainConfig(), 1)


def test_split_exact_fractions():
    tr, va, te = chronological_split(frame(100))
    assert (len(tr), len(va), len(te)) == (70, 15, 15)


def test_split_floor_then_remainder():
    tr, va, te = chronological_split(frame(10))
    assert (len(tr), len(va), len(te)) == (7, 1, 2)


@pytest.mark.parametrize("n", [10, 37, 101, 17520])
def test_split_is_disjoint_and_ordered(n):
    parts = chronological_split(frame(n), SplitSpec(0.6, 0.25, 0.15))
    stamps = [set(p.timestamps.tolist()) for p in parts]
    assert sum(len(s) for s in stamps) == n
    assert not (stamps[0] & stamps[1] or stamps[1] & stamps[2] or stamps[0] & stamps[2])
    assert parts[0].timestamps[-1] < parts[1].timestamps[0] < parts[2].timestamps[0]


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(0.7, 0.2, 0.2)
    with pytest.raises(ValueError):
        chronological_split(frame(5))


def test_train_model_signature_cannot_see_test_data():
    params = list(inspect.signature(train_model).parameters)
    assert params == ["kind", "sizes", "train_set", "val_set", "cfg", "kernels"]


def test_learns_linear_task():
    train, val = linear_task(0), linear_task(1, n=32)
    cfg = TrainConfig(max_epochs=200, patience=200, learning_rate=1e-3)
    _, report = train_model("rnn", ModelSizes(4), train, val, cfg)
    assert min(report.val_losses) < 1e-3


def test_training_loss_decreases_early():
    decreasing = 0
    for seed in range(5):
        cfg = TrainConfig(max_epochs=5, patience=10, seed=seed)
        _, report = train_model("rnn", ModelSizes(4), linear_task(seed), linear_task(seed + 10), cfg)
        losses = report.train_losses
        decreasing += all(b <= a for a, b in zip(losses, losses[1:]))
    assert decreasing >= 4


def test_patience_one_stops_after_second_epoch():
    # training pulls predictions up towards +1, validation wants -1
    cfg = TrainConfig(max_epochs=20, patience=1, learning_rate=1e-2)
    _, report = train_model("rnn", ModelSizes(3), constant_task(1.0, 0), constant_task(-1.0, 1), cfg)
    assert report.val_losses[1] > report.val_losses[0]
    assert len(report.val_losses) == 2 and report.stopped_early and report.best_epoch == 1


def test_returns_best_validation_parameters():
    cfg = TrainConfig(max_epochs=6, patience=2)
    val = linear_task(5, n=24)
    model, report = train_model("lstm", ModelSizes(3), linear_task(4, n=48), val, cfg)
    assert abs(dataset_loss(model, val) - report.best_val_loss) <= 1e-12
    assert report.best_val_loss == min(report.val_losses)


def test_training_is_deterministic(tmp_path):
    cfg = TrainConfig(max_epochs=3, seed=9)
    a, ra = train_model("lstm", ModelSizes(3), linear_task(2), linear_task(3), cfg)
    b, rb = train_model("lstm", ModelSizes(3), linear_task(2), linear_task(3), cfg)
    assert np.array_equal(a.params, b.params)
    ra.to_csv(tmp_path / "a.csv")
    rb.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_history_csv_layout(tmp_path):
    _, report = train_model("rnn", ModelSizes(2), linear_task(0, n=8), linear_task(1, n=4),
                            TrainConfig(max_epochs=2, patience=5))
    report.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss" and len(lines) == 3
    assert float(lines[2].split(",")[2]) == report.val_losses[1]


def test_divergence_raises_with_epoch():
    with pytest.raises(TrainingDiverged) as info:
        train_model("rnn", ModelSizes(2), constant_task(1e200, 0), constant_task(0.0, 1),
                    TrainConfig(max_epochs=2))
    assert info.value.epoch == 1 and "epoch 1" in str(info.value)
    assert isinstance(info.value, ArithmeticError)


def test_rejects_empty_or_mismatched_sets():
    train = linear_task(0)
    with pytest.raises(ValueError):
        train_model("rnn", ModelSizes(2), train.subset(np.zeros(len(train), bool)), train)
    other = dataset(np.zeros((2, 4, 3)), np.zeros((2, 1, 2)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        train_model("rnn", ModelSizes(2), train, other)


def test_config_validation():
    for bad in (dict(learning_rate=0), dict(patience=0), dict(max_epochs=0), dict(adam_beta1=1.0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert math.isclose(TrainConfig().learning_rate, 1e-3)
