"""Hourly well records: CSV ingest, gap handling, normalization, windowing.

CSV format (UTF-8, one file per well, well id = filename stem)::

    timestamp,rainfall_mm,tide_m,gwl_m
    2010-01-01T00:00:00Z,0.0,0.31,1.02

Channel order everywhere in this module is (rainfall, tide, gwl).
"""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .models import InputWindow

__all__ = [
    "CSV_HEADER",
    "IngestError",
    "Regime",
    "TimeSeriesFrame",
    "Normalizer",
    "SupervisedDataset",
    "ingest_csv",
    "write_csv",
    "format_timestamp",
    "parse_timestamp",
    "segment_gaps",
    "fit_normalizer",
    "build_windows",
    "window_count",
]

CSV_HEADER = ("timestamp", "rainfall_mm", "tide_m", "gwl_m")
CHANNELS = ("rainfall", "tide", "gwl")
_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:00:00Z$")
_ONE_HOUR = np.timedelta64(1, "h")


class IngestError(ValueError):
    """Malformed or inconsistent well CSV."""


class Regime(str, Enum):
    FULL = "full"
    STORM = "storm"


def format_timestamp(ts: np.datetime64) -> str:
    return np.datetime_as_string(np.datetime64(ts, "h"), unit="h") + ":00:00Z"


def parse_timestamp(text: str) -> np.datetime64:
    if not _TS_RE.match(text):
        raise ValueError(f"timestamp {text!r} is not of the form YYYY-MM-DDTHH:00:00Z")
    return np.datetime64(text[:13], "h")


@dataclass(frozen=True, eq=False)
class TimeSeriesFrame:
    """Aligned hourly rainfall (mm/h), tide (m) and groundwater level (m)."""

    well_id: str
    timestamps: np.ndarray
    rainfall: np.ndarray
    tide: np.ndarray
    gwl: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[h]")
        cols = [np.asarray(getattr(self, c), dtype=np.float64) for c in CHANNELS]
        n = ts.shape[0]
        if ts.ndim != 1 or any(c.shape != (n,) for c in cols):
            raise ValueError("timestamps and all channels must be 1-D of equal length")
        if n > 1 and not np.all(np.diff(ts) > np.timedelta64(0, "h")):
            raise ValueError("timestamps must be strictly increasing")
        for name, c in zip(CHANNELS, cols):
            if not np.all(np.isfinite(c)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(cols[0] < 0):
            raise ValueError("rainfall must be non-negative")
        object.__setattr__(self, "timestamps", ts)
        for name, c in zip(CHANNELS, cols):
            c.flags.writeable = False
            object.__setattr__(self, name, c)

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    def __getitem__(self, key: slice) -> "TimeSeriesFrame":
        if not isinstance(key, slice):
            raise TypeError("frames support slice indexing only")
        return TimeSeriesFrame(
            self.well_id, self.timestamps[key], self.rainfall[key], self.tide[key], self.gwl[key]
        )

    @property
    def values(self) -> np.ndarray:
        """(n, 3) array of rainfall, tide, gwl."""
        return np.column_stack([self.rainfall, self.tide, self.gwl])

    def is_hourly(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.timestamps) == _ONE_HOUR))

    def equals(self, other: "TimeSeriesFrame") -> bool:
        return (
            self.well_id == other.well_id
            and np.array_equal(self.timestamps, other.timestamps)
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in CHANNELS)
        )


def _parse_float(text: str, field: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"line {lineno}: {field} value {text!r} is not a number") from None
    if not math.isfinite(value):
        raise IngestError(f"line {lineno}: {field} value {text!r} is not finite")
    return value


def ingest_csv(source, well_id: str | None = None) -> TimeSeriesFrame:
    """Parse a well CSV from a path or an open text stream.

    Rows are sorted by timestamp; duplicate timestamps, malformed rows and
    negative rainfall raise :class:`IngestError` naming the line.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        well_id = well_id or path.stem
        with open(path, newline="", encoding="utf-8") as fh:
            return _ingest_stream(fh, well_id)
    return _ingest_stream(source, well_id or "well")


def _ingest_stream(fh, well_id: str) -> TimeSeriesFrame:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
        raise IngestError(f"line 1: header must be exactly {','.join(CSV_HEADER)}")
    stamps, rows = [], []
    seen = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise IngestError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            ts = parse_timestamp(row[0].strip())
        except ValueError as exc:
            raise IngestError(f"line {lineno}: {exc}") from None
        rain = _parse_float(row[1], "rainfall_mm", lineno)
        tide = _parse_float(row[2], "tide_m", lineno)
        gwl = _parse_float(row[3], "gwl_m", lineno)
        if rain < 0:
            raise IngestError(f"line {lineno}: negative rainfall {row[1]!r}")
        key = int(ts.astype(np.int64))
        if key in seen:
            raise IngestError(
                f"line {lineno}: duplicate timestamp {row[0]} (first seen on line {seen[key]})"
            )
        seen[key] = lineno
        stamps.append(ts)
        rows.append((rain, tide, gwl))
    if not rows:
        return TimeSeriesFrame(well_id, np.array([], dtype="datetime64[h]"), [], [], [])
    ts = np.array(stamps, dtype="datetime64[h]")
    vals = np.array(rows, dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    ts, vals = ts[order], vals[order]
    return TimeSeriesFrame(well_id, ts, vals[:, 0], vals[:, 1], vals[:, 2])


def write_csv(frame: TimeSeriesFrame, dest) -> None:
    """Write ``frame`` in the canonical CSV format (exact float round trip)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            _write_stream(frame, fh)
    else:
        _write_stream(frame, dest)


def _write_stream(frame: TimeSeriesFrame, fh) -> None:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for ts, r, t, g in zip(frame.timestamps, frame.rainfall, frame.tide, frame.gwl):
        buf.write(f"{format_timestamp(ts)},{float(r)!r},{float(t)!r},{float(g)!r}\n")
    fh.write(buf.getvalue())


def segment_gaps(frame: TimeSeriesFrame, max_fill: int = 3) -> list[TimeSeriesFrame]:
    """Split at gaps longer than ``max_fill`` hours, interpolate shorter ones."""
    if max_fill < 0:
        raise ValueError("max_fill must be >= 0")
    n = len(frame)
    if n == 0:
        return []
    hours = frame.timestamps.astype(np.int64)
    missing = np.diff(hours) - 1
    cuts = np.flatnonzero(missing > max_fill) + 1
    segments = []
    for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, n]):
        h = hours[lo:hi]
        full = np.arange(h[0], h[-1] + 1)
        cols = [np.interp(full, h, getattr(frame, c)[lo:hi]) for c in CHANNELS]
        segments.append(
            TimeSeriesFrame(frame.well_id, full.astype("datetime64[h]"), *cols)
        )
    return segments


@dataclass(frozen=True)
class Normalizer:
    """Per-channel min-max map to [0, 1], fitted on training rows only."""

    mins: tuple
    maxs: tuple

    def __post_init__(self):
        if len(self.mins) != 3 or len(self.maxs) != 3:
            raise ValueError("normalizer needs three channels")
        for name, lo, hi in zip(CHANNELS, self.mins, self.maxs):
            if not hi > lo:
                raise ValueError(f"channel {name} is constant on the training data")

    def _arrays(self):
        lo = np.array(self.mins, dtype=np.float64)
        return lo, np.array(self.maxs, dtype=np.float64) - lo

    def apply(self, values: np.ndarray) -> np.ndarray:
        lo, span = self._arrays()
        return (np.asarray(values, dtype=np.float64) - lo) / span

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        lo, span = self._arrays()
        return np.asarray(scaled, dtype=np.float64) * span + lo

    def apply_channel(self, x, channel: int):
        return (np.asarray(x, dtype=np.float64) - self.mins[channel]) / (
            self.maxs[channel] - self.mins[channel]
        )

    def invert_channel(self, x, channel: int):
        return np.asarray(x, dtype=np.float64) * (
            self.maxs[channel] - self.mins[channel]
        ) + self.mins[channel]

    def to_dict(self) -> dict:
        return {"channels": list(CHANNELS), "min": list(self.mins), "max": list(self.maxs)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Normalizer":
        return cls(tuple(float(v) for v in doc["min"]), tuple(float(v) for v in doc["max"]))


def fit_normalizer(train_segments) -> Normalizer:
    segs = [s for s in train_segments if len(s)]
    if not segs:
        raise ValueError("cannot fit a normalizer on empty training data")
    vals = np.concatenate([s.values for s in segs])
    mins, maxs = vals.min(axis=0), vals.max(axis=0)
    return Normalizer(tuple(float(v) for v in mins), tuple(float(v) for v in maxs))


def window_count(length: int, lookback: int, horizon: int) -> int:
    return max(0, length - lookback - horizon + 1)


@dataclass(frozen=True, eq=False)
class SupervisedDataset:
    """Normalized (input window, target) pairs with their source indices.

    Window ``i`` was cut from segment ``segment_index[i]`` starting at row
    ``offset[i]``: past rows ``[o, o+lookback)``, future rows and targets
    ``[o+lookback, o+lookback+horizon)``.
    """

    past: np.ndarray  # (n, lookback, 3)
    future: np.ndarray  # (n, horizon, 2)
    targets: np.ndarray  # (n, horizon)
    segment_index: np.ndarray
    offset: np.ndarray
    lookback: int
    horizon: int
    normalizer: Normalizer
    provenance: Regime = Regime.FULL

    def __len__(self) -> int:
        return self.targets.shape[0]

    def window(self, i: int) -> InputWindow:
        return InputWindow(self.past[i], self.future[i])

    def sources(self) -> set:
        return set(zip(self.segment_index.tolist(), self.offset.tolist()))

    def subset(self, mask, provenance: Regime | None = None) -> "SupervisedDataset":
        mask = np.asarray(mask)
        return SupervisedDataset(
            self.past[mask], self.future[mask], self.targets[mask],
            self.segment_index[mask], self.offset[mask], self.lookback, self.horizon,
            self.normalizer, provenance or self.provenance,
        )


def build_windows(segments, lookback: int, horizon: int, normalizer: Normalizer,
                  provenance: Regime = Regime.FULL) -> SupervisedDataset:
    """Cut every window of every gap-free segment.

    Future rain and tide are the observed values (perfect-forecast stand-in).
    """
    if lookback < 1 or horizon < 1:
        raise ValueError("lookback and horizon must be >= 1")
    pasts, futures, targets, seg_idx, offsets = [], [], [], [], []
    span = lookback + horizon
    for k, seg in enumerate(segments):
        n = window_count(len(seg), lookback, horizon)
        if n == 0:
            continue
        if not seg.is_hourly():
            raise ValueError(f"segment {k} is not gap-free; run segment_gaps first")
        # index guard: the last window's targets end inside the segment, and
        # targets start at offset+lookback, after the last past row
        assert (n - 1) + span <= len(seg)
        scaled = normalizer.apply(seg.values)
        views = np.lib.stride_tricks.sliding_window_view(scaled, span, axis=0)[:n]
        views = views.transpose(0, 2, 1)  # (n, span, 3)
        pasts.append(views[:, :lookback, :])
        futures.append(views[:, lookback:, :2])
        targets.append(views[:, lookback:, 2])
        seg_idx.append(np.full(n, k, dtype=np.int64))
        offsets.append(np.arange(n, dtype=np.int64))
    if pasts:
        past = np.ascontiguousarray(np.concatenate(pasts))
        future = np.ascontiguousarray(np.concatenate(futures))
        target = np.ascontiguousarray(np.concatenate(targets))
        seg_arr, off_arr = np.concatenate(seg_idx), np.concatenate(offsets)
    else:
        past = np.zeros((0, lookback, 3))
        future = np.zeros((0, horizon, 2))
        target = np.zeros((0, horizon))
        seg_arr = off_arr = np.zeros(0, dtype=np.int64)
    return SupervisedDataset(
        past, future, target, seg_arr, off_arr, lookback, horizon, normalizer, provenance
    )
