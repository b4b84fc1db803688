"""Storm-event detection on hourly rainfall and the storm-only training set.

An event is a run of wet hours (rain above ``wet_threshold``) where runs
separated by fewer than ``dry_gap`` dry hours are merged.  Events whose core
rainfall total falls below ``min_total_rain`` are dropped, the survivors are
padded by ``lead_pad``/``tail_pad`` hours (clipped to the segment) and padded
ranges that overlap are merged.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Regime, SupervisedDataset, build_windows, format_timestamp

__all__ = [
    "StormParams",
    "StormEvent",
    "wet_hours",
    "detect_storms",
    "detect_storms_all",
    "storm_window_mask",
    "extract_storm_dataset",
    "write_events_csv",
    "EVENTS_HEADER",
]

EVENTS_HEADER = (
    "segment_id", "start_iso", "end_iso", "core_start_iso", "core_end_iso",
    "total_rain_mm", "peak_rain_mm",
)


@dataclass(frozen=True)
class StormParams:
    wet_threshold: float = 0.5  # mm/h
    dry_gap: int = 12  # h
    min_total_rain: float = 5.0  # mm
    lead_pad: int = 24  # h
    tail_pad: int = 72  # h

    def __post_init__(self):
        if not self.wet_threshold > 0:
            raise ValueError("wet_threshold must be > 0")
        for name in ("dry_gap", "min_total_rain", "lead_pad", "tail_pad"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class StormEvent:
    """Indices are inclusive row positions inside one gap-free segment."""

    segment_id: int
    start_index: int
    end_index: int
    core_start: int
    core_end: int
    total_rain: float
    peak_rain: float

    def overlaps(self, lo: int, hi: int) -> bool:
        """True if the inclusive row range [lo, hi] touches this event."""
        return lo <= self.end_index and hi >= self.start_index


def wet_hours(rain, threshold: float) -> np.ndarray:
    return np.asarray(rain, dtype=np.float64) > threshold


def detect_storms(segment, p: StormParams, segment_id: int = 0) -> list[StormEvent]:
    rain = np.asarray(segment.rainfall, dtype=np.float64)
    n = rain.shape[0]
    wet = np.flatnonzero(wet_hours(rain, p.wet_threshold))
    if wet.size == 0:
        return []
    # runs of wet hours, merged when the dry stretch between is < dry_gap
    cores = []
    start = prev = int(wet[0])
    for i in wet[1:]:
        i = int(i)
        gap = i - prev - 1
        if gap == 0 or gap < p.dry_gap:
            prev = i
            continue
        cores.append((start, prev))
        start = prev = i
    cores.append((start, prev))

    events = []
    for cs, ce in cores:
        total = float(rain[cs : ce + 1].sum())
        if total < p.min_total_rain:
            continue
        ev = StormEvent(
            segment_id,
            max(0, cs - p.lead_pad),
            min(n - 1, ce + p.tail_pad),
            cs,
            ce,
            total,
            float(rain[cs : ce + 1].max()),
        )
        if events and ev.start_index <= events[-1].end_index:
            last = events.pop()
            ev = StormEvent(
                segment_id,
                last.start_index,
                max(last.end_index, ev.end_index),
                last.core_start,
                ev.core_end,
                last.total_rain + ev.total_rain,
                max(last.peak_rain, ev.peak_rain),
            )
        events.append(ev)
    return events


def detect_storms_all(segments, p: StormParams) -> list[StormEvent]:
    out = []
    for k, seg in enumerate(segments):
        out.extend(detect_storms(seg, p, segment_id=k))
    return out


def storm_window_mask(dataset: SupervisedDataset, events) -> np.ndarray:
    """Windows whose target block intersects an event of the same segment."""
    mask = np.zeros(len(dataset), dtype=bool)
    lo = dataset.offset + dataset.lookback
    hi = lo + dataset.horizon - 1
    for ev in events:
        mask |= (dataset.segment_index == ev.segment_id) & (lo <= ev.end_index) & (
            hi >= ev.start_index
        )
    return mask


def extract_storm_dataset(segments, events, lookback: int, horizon: int,
                          normalizer) -> SupervisedDataset:
    full = build_windows(segments, lookback, horizon, normalizer)
    return full.subset(storm_window_mask(full, events), provenance=Regime.STORM)


def write_events_csv(segments, events, dest) -> None:
    rows = [EVENTS_HEADER]
    for ev in events:
        ts = segments[ev.segment_id].timestamps
        rows.append(
            (
                ev.segment_id,
                format_timestamp(ts[ev.start_index]),
                format_timestamp(ts[ev.end_index]),
                format_timestamp(ts[ev.core_start]),
                format_timestamp(ts[ev.core_end]),
                repr(ev.total_rain),
                repr(ev.peak_rain),
            )
        )
    with open(Path(dest), "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
