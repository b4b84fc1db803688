"""Experiment plumbing shared by the CLI and the acceptance experiments.

Order of operations keeps the test period out of everything that trains:
split chronologically, segment each part at gaps, fit the normalizer on the
training segments, detect training storms on training (and validation)
segments only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (
    Normalizer,
    Regime,
    SupervisedDataset,
    TimeSeriesFrame,
    build_windows,
    fit_normalizer,
    segment_gaps,
)
from .models import InputWindow, SequenceModel, load_model, model_forward, save_model
from .storms import StormParams, detect_storms_all, storm_window_mask
from .training import ModelSizes, SplitSpec, TrainConfig, chronological_split, train_model

__all__ = ["Forecaster", "Prepared", "prepare", "training_sets", "fit_regime"]


@dataclass(frozen=True, eq=False)
class Forecaster:
    """A trained model together with the windowing it expects."""

    model: SequenceModel
    normalizer: Normalizer
    lookback: int
    horizon: int
    provenance: Regime
    well_id: str = ""

    def predict_window(self, past: np.ndarray, future: np.ndarray) -> np.ndarray:
        preds, _ = model_forward(InputWindow(past, future), self.model)
        return preds

    def compatible(self, other: "Forecaster") -> bool:
        return (
            self.normalizer == other.normalizer
            and self.lookback == other.lookback
            and self.horizon == other.horizon
            and self.model.input_size == other.model.input_size
        )

    def meta(self) -> dict:
        return {
            "lookback": self.lookback,
            "horizon": self.horizon,
            "normalizer": self.normalizer.to_dict(),
            "provenance": self.provenance.value,
            "well_id": self.well_id,
        }

    def save(self, path) -> None:
        save_model(path, self.model, self.meta())

    @classmethod
    def load(cls, path) -> "Forecaster":
        model, meta = load_model(path)
        if meta is None:
            raise ValueError(f"{path}: model file carries no forecasting metadata")
        return cls(
            model,
            Normalizer.from_dict(meta["normalizer"]),
            int(meta["lookback"]),
            int(meta["horizon"]),
            Regime(meta["provenance"]),
            meta.get("well_id", ""),
        )


@dataclass(frozen=True, eq=False)
class Prepared:
    well_id: str
    train_segments: list
    val_segments: list
    test_segments: list
    normalizer: Normalizer
    lookback: int
    horizon: int
    storm_params: StormParams

    def windows(self, part: str) -> SupervisedDataset:
        segs = {"train": self.train_segments, "val": self.val_segments, "test": self.test_segments}[part]
        return build_windows(segs, self.lookback, self.horizon, self.normalizer)

    def events(self, part: str) -> list:
        segs = {"train": self.train_segments, "val": self.val_segments, "test": self.test_segments}[part]
        return detect_storms_all(segs, self.storm_params)


def prepare(frame: TimeSeriesFrame, split: SplitSpec = SplitSpec(), lookback: int = 48,
            horizon: int = 18, max_fill: int = 3,
            storm_params: StormParams = StormParams()) -> Prepared:
    train, val, test = chronological_split(frame, split)
    train_segs = segment_gaps(train, max_fill)
    return Prepared(
        frame.well_id,
        train_segs,
        segment_gaps(val, max_fill),
        segment_gaps(test, max_fill),
        fit_normalizer(train_segs),
        lookback,
        horizon,
        storm_params,
    )


def training_sets(prep: Prepared, regime: Regime):
    """(train, val) datasets for a regime; never touches the test segments.

    The storm regime validates on storm windows of the validation period,
    falling back to all validation windows when that period has no storm.
    """
    train = prep.windows("train")
    val = prep.windows("val")
    if regime is Regime.FULL:
        return train, val
    train = train.subset(storm_window_mask(train, prep.events("train")), Regime.STORM)
    if len(train) == 0:
        raise ValueError("no storm events detected in the training period")
    storm_val = val.subset(storm_window_mask(val, prep.events("val")), Regime.STORM)
    return train, (storm_val if len(storm_val) else val)


def fit_regime(prep: Prepared, regime: Regime, kind: str = "lstm",
               sizes: ModelSizes = ModelSizes(), cfg: TrainConfig = TrainConfig()):
    """Train one regime; returns ``(forecaster, report)``."""
    train, val = training_sets(prep, regime)
    model, report = train_model(kind, sizes, train, val, cfg)
    return Forecaster(model, prep.normalizer, prep.lookback, prep.horizon, regime, prep.well_id), report
