"""Forecast skill metrics, rolling-origin forecasting and model comparison."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Normalizer, Regime, build_windows, format_timestamp
from .storms import StormParams, detect_storms_all, storm_window_mask

__all__ = [
    "rmse",
    "mae",
    "nse",
    "ForecastResult",
    "ComparisonReport",
    "rolling_forecast",
    "compare_models",
]

REGIMES = ("all", "storm")
METRICS = ("rmse", "mae", "nse")


def _pair(pred, obs):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    obs = np.asarray(obs, dtype=np.float64).ravel()
    if pred.shape != obs.shape:
        raise ValueError(f"length mismatch: pred {pred.shape} vs obs {obs.shape}")
    if pred.size == 0:
        raise ValueError("metrics need at least one value")
    return pred, obs


def rmse(pred, obs) -> float:
    pred, obs = _pair(pred, obs)
    return math.sqrt(float(np.mean((pred - obs) ** 2)))


def mae(pred, obs) -> float:
    pred, obs = _pair(pred, obs)
    return float(np.mean(np.abs(pred - obs)))


def nse(pred, obs) -> float:
    """Nash-Sutcliffe efficiency, 1 - SSE / sum((obs - mean(obs))**2)."""
    pred, obs = _pair(pred, obs)
    ss = float(np.sum((obs - obs.mean()) ** 2))
    if ss == 0.0:
        raise ValueError("NSE is undefined for constant observations")
    return 1.0 - float(np.sum((pred - obs) ** 2)) / ss


@dataclass(frozen=True, eq=False)
class ForecastResult:
    """Rolling-origin forecasts in metres.

    ``origins[i]`` is the last observed hour; row ``i`` of ``pred``/``obs``
    covers the ``horizon`` hours after it.
    """

    well_id: str
    origins: np.ndarray
    pred: np.ndarray  # (n, horizon)
    obs: np.ndarray  # (n, horizon)
    provenance: Regime
    segment_index: np.ndarray
    offset: np.ndarray
    lookback: int

    @property
    def horizon(self) -> int:
        return self.pred.shape[1]

    def __len__(self) -> int:
        return self.pred.shape[0]

    def to_csv(self, dest) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("origin_iso", "step", "pred_gwl_m", "obs_gwl_m", "provenance"))
        for i, origin in enumerate(self.origins):
            iso = format_timestamp(origin)
            for s in range(self.horizon):
                w.writerow((iso, s + 1, repr(float(self.pred[i, s])), repr(float(self.obs[i, s])),
                            self.provenance.value))
        Path(dest).write_text(buf.getvalue(), encoding="utf-8")


def rolling_forecast(forecaster, test_segments, lookback: int, horizon: int,
                     normalizer: Normalizer, batched: bool = True) -> ForecastResult:
    """Issue a fresh forecast from every hour of the test segments.

    The window for origin ``t`` holds observed rain/tide/gwl up to ``t`` and
    rain/tide over ``(t, t+horizon]``.  ``batched=False`` rebuilds each window
    from the raw rows instead of slicing a prebuilt dataset; both paths give
    bit-identical predictions.
    """
    if forecaster.normalizer != normalizer:
        raise ValueError("normalizer mismatch: model was trained with a different normalizer")
    if (forecaster.lookback, forecaster.horizon) != (lookback, horizon):
        raise ValueError(
            f"model expects lookback/horizon {forecaster.lookback}/{forecaster.horizon}, "
            f"got {lookback}/{horizon}"
        )
    origins, preds, obs, seg_idx, offs = [], [], [], [], []
    if batched:
        ds = build_windows(test_segments, lookback, horizon, normalizer)
        for i in range(len(ds)):
            preds.append(forecaster.predict_window(ds.past[i], ds.future[i]))
        seg_idx, offs = ds.segment_index, ds.offset
        for k, o in zip(seg_idx, offs):
            seg = test_segments[k]
            origins.append(seg.timestamps[o + lookback - 1])
            obs.append(seg.gwl[o + lookback : o + lookback + horizon])
    else:
        for k, seg in enumerate(test_segments):
            raw = seg.values
            for o in range(max(0, len(seg) - lookback - horizon + 1)):
                past = normalizer.apply(raw[o : o + lookback])
                future = normalizer.apply(raw[o + lookback : o + lookback + horizon])[:, :2]
                preds.append(forecaster.predict_window(past, future))
                origins.append(seg.timestamps[o + lookback - 1])
                obs.append(seg.gwl[o + lookback : o + lookback + horizon])
                seg_idx.append(k)
                offs.append(o)
    n = len(preds)
    pred_n = np.array(preds).reshape(n, horizon)
    return ForecastResult(
        forecaster.well_id,
        np.array(origins, dtype="datetime64[h]"),
        normalizer.invert_channel(pred_n, 2),
        np.array(obs, dtype=np.float64).reshape(n, horizon),
        forecaster.provenance,
        np.asarray(seg_idx, dtype=np.int64),
        np.asarray(offs, dtype=np.int64),
        lookback,
    )


def _metric_row(pred, obs) -> dict:
    if pred.size == 0:
        return {"n": 0, "rmse": None, "mae": None, "nse": None, "status": "empty"}
    try:
        score = nse(pred, obs)
    except ValueError:
        score = None
    return {"n": int(pred.shape[0]), "rmse": rmse(pred, obs), "mae": mae(pred, obs),
            "nse": score, "status": "ok"}


@dataclass
class ComparisonReport:
    """Metrics for both models over all test origins and storm origins.

    ``rows[(model, regime)]`` holds n, rmse, mae, nse and a status that is
    "empty" when the regime has no origins.  ``step_rmse[(model, regime)]``
    is the RMSE curve over horizon steps.
    """

    well_id: str
    horizon: int
    rows: dict = field(default_factory=dict)
    step_rmse: dict = field(default_factory=dict)
    step_nse: dict = field(default_factory=dict)
    winners: dict = field(default_factory=dict)
    n_test_storms: int = 0

    def to_csv(self, dest) -> None:
        Path(dest).write_text(self.csv_text(), encoding="utf-8")

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("model", "regime", "n_origins", "rmse_m", "mae_m", "nse", "status", "winner"))

        def fmt(v):
            return "" if v is None else repr(v)

        for regime in REGIMES:
            for model in ("full", "storm"):
                r = self.rows[(model, regime)]
                w.writerow((model, regime, r["n"], fmt(r["rmse"]), fmt(r["mae"]), fmt(r["nse"]),
                            r["status"], self.winners[(regime, "rmse")]))
        w.writerow(())
        w.writerow(("regime", "step", "full_rmse_m", "storm_rmse_m"))
        for regime in REGIMES:
            for s in range(self.horizon):
                full = self.step_rmse[("full", regime)]
                storm = self.step_rmse[("storm", regime)]
                w.writerow((regime, s + 1, fmt(full[s] if full else None),
                            fmt(storm[s] if storm else None)))
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"well {self.well_id}: full-trained vs storm-trained forecasts",
                 f"test storms detected: {self.n_test_storms}"]
        for regime in REGIMES:
            label = "all test origins" if regime == "all" else "storm-period origins"
            full, storm = self.rows[("full", regime)], self.rows[("storm", regime)]
            if full["status"] == "empty":
                lines.append(f"{label}: empty (no origins)")
                continue
            lines.append(f"{label} (n={full['n']}):")
            for metric in METRICS:
                f, s = full[metric], storm[metric]
                fs = "n/a" if f is None else f"{f:.4f}"
                ss = "n/a" if s is None else f"{s:.4f}"
                lines.append(f"  {metric.upper():4s} full {fs}  storm {ss}  winner {self.winners[(regime, metric)]}")
        return "\n".join(lines) + "\n"


def _winner(metric: str, f, s) -> str:
    if f is None or s is None:
        return "empty"
    if f == s:
        return "tie"
    better_storm = s > f if metric == "nse" else s < f
    return "storm" if better_storm else "full"


def compare_models(full, storm, test_segments, storm_params: StormParams,
                   results=None) -> ComparisonReport:
    """Score full- and storm-trained forecasters on the test segments.

    Storm periods are detected on the test segments with ``storm_params``;
    a storm origin is one whose target block intersects an event.
    ``results`` may pass precomputed ``(full_result, storm_result)``.
    """
    if not full.compatible(storm):
        raise ValueError("models differ in normalizer, lookback, horizon or input size")
    if results is None:
        results = tuple(
            rolling_forecast(f, test_segments, f.lookback, f.horizon, f.normalizer)
            for f in (full, storm)
        )
    events = detect_storms_all(test_segments, storm_params)
    report = ComparisonReport(full.well_id, full.horizon, n_test_storms=len(events))
    masks = {"all": np.ones(len(results[0]), dtype=bool), "storm": storm_window_mask(results[0], events)}
    for name, res in zip(("full", "storm"), results):
        for regime, mask in masks.items():
            p, o = res.pred[mask], res.obs[mask]
            report.rows[(name, regime)] = _metric_row(p, o)
            if p.size:
                report.step_rmse[(name, regime)] = [rmse(p[:, s], o[:, s]) for s in range(res.horizon)]
                report.step_nse[(name, regime)] = [
                    _metric_row(p[:, s], o[:, s])["nse"] for s in range(res.horizon)
                ]
            else:
                report.step_rmse[(name, regime)] = []
                report.step_nse[(name, regime)] = []
    for regime in REGIMES:
        for metric in METRICS:
            report.winners[(regime, metric)] = _winner(
                metric, report.rows[("full", regime)][metric], report.rows[("storm", regime)][metric]
            )
    return report
