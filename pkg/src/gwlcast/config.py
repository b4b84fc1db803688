"""Run configuration: one JSON document, validated before any work starts.

Example::

    {
      "data": {"synthetic": {"n_hours": 17520, "seed": 7}, "max_fill": 3},
      "window": {"lookback": 48, "horizon": 18},
      "split": {"train_frac": 0.7, "val_frac": 0.15, "test_frac": 0.15},
      "storms": {"wet_threshold": 0.5, "dry_gap": 12},
      "model": {"kind": "lstm", "hidden_size": 20},
      "train": {"max_epochs": 20, "seed": 0},
      "compare": {"plot_step": 18, "plot_hours": 336},
      "output_dir": "runs/example"
    }

Every section is optional; unknown keys anywhere are rejected.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .storms import StormParams
from .synth import HydroConfig
from .training import SplitSpec, TrainConfig

__all__ = ["ConfigError", "RunConfig", "DataConfig", "WindowConfig", "ModelConfig",
           "CompareConfig", "load_run_config", "run_config_from_dict"]


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class DataConfig:
    csv: str | None = None
    synthetic: HydroConfig | None = None
    max_fill: int = 3

    def __post_init__(self):
        if self.csv is not None and self.synthetic is not None:
            raise ValueError("data.csv and data.synthetic are mutually exclusive")
        if self.max_fill < 0:
            raise ValueError("data.max_fill must be >= 0")


@dataclass(frozen=True)
class WindowConfig:
    lookback: int = 48
    horizon: int = 18

    def __post_init__(self):
        if self.lookback < 1 or self.horizon < 1:
            raise ValueError("lookback and horizon must be >= 1")


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "lstm"
    hidden_size: int = 20
    n_layers: int | None = None

    def __post_init__(self):
        if self.kind not in ("rnn", "lstm"):
            raise ValueError("model.kind must be 'rnn' or 'lstm'")
        if self.hidden_size < 1:
            raise ValueError("model.hidden_size must be >= 1")
        if self.n_layers is not None:
            if self.kind == "rnn" and self.n_layers != 1:
                raise ValueError("an RNN model has exactly one layer")
            if self.kind == "lstm" and self.n_layers < 2:
                raise ValueError("an LSTM model has at least two layers")


@dataclass(frozen=True)
class CompareConfig:
    plot_step: int | None = None  # None: last horizon step
    plot_hours: int = 336

    def __post_init__(self):
        if self.plot_hours < 1:
            raise ValueError("compare.plot_hours must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    storms: StormParams = field(default_factory=StormParams)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    output_dir: str = "gwlcast-out"

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)


_NESTED = {
    RunConfig: {"data": DataConfig, "window": WindowConfig, "split": SplitSpec,
                "storms": StormParams, "model": ModelConfig, "train": TrainConfig,
                "compare": CompareConfig},
    DataConfig: {"synthetic": HydroConfig},
}


def _check_value(cls, name, value, default, where):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int) and name not in ("n_layers",):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}{name}: unexpected value {value!r}")
    return value


def _build(cls, doc, where=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - set(names))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    nested = _NESTED.get(cls, {})
    kwargs = {}
    for key, value in doc.items():
        if key in nested and value is not None:
            kwargs[key] = _build(nested[key], value, f"{where}{key}.")
            continue
        f = names[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        if value is None:
            kwargs[key] = None
        else:
            kwargs[key] = _check_value(cls, key, value, default, where)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def run_config_from_dict(doc: dict) -> RunConfig:
    return _build(RunConfig, doc)


def load_run_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return run_config_from_dict(doc)
