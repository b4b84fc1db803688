"""MSE loss, Adam, chronological splitting and the per-sample training loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backend
from .data import SupervisedDataset, TimeSeriesFrame
from .models import SequenceModel, clip_by_global_norm
from .numerics import Prng

__all__ = [
    "TrainConfig",
    "ModelSizes",
    "SplitSpec",
    "TrainReport",
    "AdamState",
    "TrainingDiverged",
    "mse_loss",
    "adam_step",
    "chronological_split",
    "predict_dataset",
    "dataset_loss",
    "train_model",
]

log = logging.getLogger(__name__)


class TrainingDiverged(ArithmeticError):
    """Loss became NaN or infinite during training."""

    def __init__(self, epoch: int, sample: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, training sample {sample}")
        self.epoch = epoch
        self.sample = sample


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 5
    clip_norm: float = 5.0
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be > 0")


@dataclass(frozen=True)
class ModelSizes:
    hidden_size: int = 20
    n_layers: int | None = None  # None: 1 for RNN, 2 for LSTM


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not 0 < f < 1 for f in fracs):
            raise ValueError("split fractions must each lie in (0, 1)")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(fracs)}, not 1")


@dataclass
class TrainReport:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def best_val_loss(self) -> float:
        return self.val_losses[self.best_epoch - 1]

    def to_csv(self, dest) -> None:
        with open(Path(dest), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch", "train_loss", "val_loss"))
            for e, (tr, va) in enumerate(zip(self.train_losses, self.val_losses), start=1):
                w.writerow((e, repr(tr), repr(va)))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def mse_loss(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError(f"length mismatch: preds {preds.shape} vs targets {targets.shape}")
    return float(np.mean((preds - targets) ** 2))


def adam_step(params, grads, state: AdamState, cfg: TrainConfig, t: int):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if not (params.shape == grads.shape == state.m.shape == state.v.shape):
        raise ValueError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}/{state.v.shape}"
        )
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return new, AdamState(m, v)


def chronological_split(frame: TimeSeriesFrame, spec: SplitSpec = SplitSpec()):
    """Contiguous train/val/test slices; train and val sizes are floored,
    test takes the remainder."""
    n = len(frame)
    if n < 10:
        raise ValueError(f"frame of {n} rows is too short to split (need >= 10)")
    n_train = math.floor(n * spec.train_frac + 1e-9)
    n_val = math.floor(n * spec.val_frac + 1e-9)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f"frame of {n} rows gives an empty split ({n_train}/{n_val}/{n_test})"
        )
    return frame[:n_train], frame[n_train : n_train + n_val], frame[n_train + n_val :]


def predict_dataset(model: SequenceModel, dataset: SupervisedDataset, kernels=None) -> np.ndarray:
    """Normalized predictions, shape (len(dataset), horizon)."""
    k = kernels or backend
    out = np.zeros((len(dataset), dataset.horizon))
    args = (model.kind_code, model.n_layers, model.hidden_size, model.input_size, model.params)
    for i in range(len(dataset)):
        out[i] = k.forward(*args, dataset.past[i], dataset.future[i])[0]
    return out


def dataset_loss(model: SequenceModel, dataset: SupervisedDataset, kernels=None) -> float:
    """Mean over windows of the per-window MSE."""
    preds = predict_dataset(model, dataset, kernels)
    return float(np.mean((preds - dataset.targets) ** 2))


def train_model(kind: str, sizes: ModelSizes, train_set: SupervisedDataset,
                val_set: SupervisedDataset, cfg: TrainConfig = TrainConfig(),
                kernels=None):
    """Per-sample Adam training with early stopping on validation loss.

    Returns ``(model, report)`` where ``model`` holds the parameters of the
    epoch with the lowest validation loss.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation datasets must be non-empty")
    if train_set.normalizer != val_set.normalizer:
        raise ValueError("training and validation sets use different normalizers")
    if (train_set.lookback, train_set.horizon) != (val_set.lookback, val_set.horizon):
        raise ValueError("training and validation windows differ in lookback/horizon")
    k = kernels or backend
    prng = Prng(cfg.seed)
    model = SequenceModel.initialize(kind, prng, sizes.hidden_size, sizes.n_layers)
    arch = (model.kind_code, model.n_layers, model.hidden_size, model.input_size)
    lookback, horizon = train_set.lookback, train_set.horizon
    params = model.params.copy()
    state = AdamState.zeros(params.shape[0])
    report = TrainReport()
    best_params, best_val, bad_epochs, step = params.copy(), math.inf, 0, 0
    n = len(train_set)
    for epoch in range(1, cfg.max_epochs + 1):
        order = prng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        total = 0.0
        for idx in order:
            preds, x0, hs, cs, acts = k.forward(
                *arch, params, train_set.past[idx], train_set.future[idx]
            )
            diff = preds - train_set.targets[idx]
            loss = float(np.dot(diff, diff)) / horizon
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, int(idx), loss)
            grad = k.backward(*arch, params, x0, hs, cs, acts, lookback, (2.0 / horizon) * diff)
            grad = clip_by_global_norm(np.asarray(grad), cfg.clip_norm)
            step += 1
            params, state = adam_step(params, grad, state, cfg, step)
            total += loss
        if not np.all(np.isfinite(params)):
            raise TrainingDiverged(epoch, int(order[-1]), math.nan)
        val = dataset_loss(model.with_params(params), val_set, k)
        if not math.isfinite(val):
            raise TrainingDiverged(epoch, -1, val)
        report.train_losses.append(total / n)
        report.val_losses.append(val)
        log.info("epoch %d train %.6g val %.6g", epoch, total / n, val)
        if val < best_val:
            best_val, best_params, bad_epochs = val, params.copy(), 0
            report.best_epoch = epoch
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                report.stopped_early = True
                break
    return model.with_params(best_params), report
