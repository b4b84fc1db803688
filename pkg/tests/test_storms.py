import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwlcast.data import Normalizer, Regime, TimeSeriesFrame, build_windows
from gwlcast.storms import (
    StormParams,
    detect_storms,
    detect_storms_all,
    extract_storm_dataset,
    storm_window_mask,
    wet_hours,
    write_events_csv,
)

from oracles import brute_storm_events, brute_storm_windows

UNIT = Normalizer((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def seg_with_rain(rain, start_hour=0):
    rain = np.asarray(rain, dtype=np.float64)
    n = len(rain)
    ts = np.datetime64("2021-03-01T00", "h") + (np.arange(n) + start_hour).astype("timedelta64[h]")
    return TimeSeriesFrame("w", ts, rain, np.sin(np.arange(n) / 3.0), np.linspace(0, 1, n))


def covered_hours(events, segment_id=0):
    out = set()
    for e in events:
        if e.segment_id == segment_id:
            out.update(range(e.start_index, e.end_index + 1))
    return out


def test_params_validation():
    with pytest.raises(ValueError):
        StormParams(wet_threshold=0.0)
    with pytest.raises(ValueError):
        StormParams(dry_gap=-1)


def test_all_zero_rain_has_no_events():
    assert detect_storms(seg_with_rain(np.zeros(200)), StormParams()) == []


def test_single_burst_hand_trace():
    rain = np.zeros(200)
    rain[100:103] = 5.0
    (ev,) = detect_storms(seg_with_rain(rain), StormParams(lead_pad=24, tail_pad=72))
    assert (ev.core_start, ev.core_end) == (100, 102)
    assert (ev.start_index, ev.end_index) == (76, 174)
    assert ev.end_index - ev.start_index + 1 == 99
    assert ev.total_rain == 15.0 and ev.peak_rain == 5.0


def test_single_burst_clipped_at_edges():
    rain = np.zeros(200)
    rain[5:8] = 5.0
    rain[190:193] = 5.0
    first, last = detect_storms(seg_with_rain(rain), StormParams())
    assert first.start_index == 0 and last.end_index == 199


@pytest.mark.parametrize("gap, n_events", [(11, 1), (13, 2)])
def test_dry_gap_boundary(gap, n_events):
    p = StormParams(dry_gap=12, lead_pad=0, tail_pad=0)
    rain = np.zeros(200)
    rain[50:53] = 5.0
    rain[53 + gap : 56 + gap] = 5.0
    assert len(detect_storms(seg_with_rain(rain), p)) == n_events


def test_small_storm_dropped():
    rain = np.zeros(100)
    rain[40:42] = 2.0  # 4 mm < 5 mm
    assert detect_storms(seg_with_rain(rain), StormParams()) == []


def test_padded_overlap_merges_events():
    p = StormParams(dry_gap=2, lead_pad=10, tail_pad=10, min_total_rain=1.0)
    rain = np.zeros(100)
    rain[30] = rain[45] = 5.0  # separate cores, padded ranges overlap
    (ev,) = detect_storms(seg_with_rain(rain), p)
    assert (ev.start_index, ev.end_index, ev.total_rain) == (20, 55, 10.0)


rain_strategy = st.lists(
    st.one_of(st.just(0.0), st.floats(0.0, 0.6), st.floats(0.5, 10.0)), min_size=1, max_size=120
)
param_strategy = st.builds(
    StormParams,
    wet_threshold=st.floats(0.1, 2.0),
    dry_gap=st.integers(0, 15),
    min_total_rain=st.floats(0.0, 20.0),
    lead_pad=st.integers(0, 20),
    tail_pad=st.integers(0, 30),
)


@given(rain_strategy, param_strategy)
@settings(max_examples=200, deadline=None)
def test_detect_matches_hour_labelling_oracle(rain, p):
    events = detect_storms(seg_with_rain(rain), p)
    ranges = brute_storm_events(rain, p.wet_threshold, p.dry_gap, p.min_total_rain,
                                p.lead_pad, p.tail_pad)
    expected = {h for lo, hi in ranges for h in range(lo, hi + 1)}
    assert covered_hours(events) == expected
    # events sorted and pairwise non-overlapping
    for a, b in zip(events, events[1:]):
        assert a.end_index < b.start_index


@given(rain_strategy, param_strategy)
@settings(max_examples=50, deadline=None)
def test_detect_is_pure(rain, p):
    seg = seg_with_rain(rain)
    assert detect_storms(seg, p) == detect_storms(seg, p)


@given(rain_strategy, st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_lower_threshold_marks_more_wet_hours(rain, t1, t2):
    lo, hi = sorted((t1, t2))
    assert wet_hours(rain, lo).sum() >= wet_hours(rain, hi).sum()
    assert np.all(wet_hours(rain, lo) >= wet_hours(rain, hi))


def test_extract_no_events_is_empty():
    ds = extract_storm_dataset([seg_with_rain(np.ones(50))], [], 4, 2, UNIT)
    assert len(ds) == 0 and ds.provenance is Regime.STORM


def test_extract_whole_segment_event_equals_full():
    rain = np.full(60, 2.0)
    seg = seg_with_rain(rain)
    events = detect_storms(seg, StormParams())
    assert (events[0].start_index, events[0].end_index) == (0, 59)
    full = build_windows([seg], 6, 3, UNIT)
    storm = extract_storm_dataset([seg], events, 6, 3, UNIT)
    assert storm.sources() == full.sources()
    assert np.array_equal(storm.past, full.past)


def test_extract_mid_record_event_manual_enumeration():
    rain = np.zeros(40)
    rain[20] = 6.0
    p = StormParams(lead_pad=2, tail_pad=3)
    seg = seg_with_rain(rain)
    (ev,) = detect_storms(seg, p)
    assert (ev.start_index, ev.end_index) == (18, 23)
    ds = extract_storm_dataset([seg], [ev], 5, 3, UNIT)
    # targets [o+5, o+7] intersect [18, 23]  <=>  11 <= o <= 18
    assert sorted(o for _, o in ds.sources()) == list(range(11, 19))


@given(st.lists(rain_strategy, min_size=1, max_size=3), st.integers(1, 6), st.integers(1, 6),
       param_strategy)
@settings(max_examples=100, deadline=None)
def test_extract_matches_brute_force_and_is_subset(rains, lookback, horizon, p):
    segs = [seg_with_rain(r, start_hour=500 * k) for k, r in enumerate(rains)]
    events = detect_storms_all(segs, p)
    storm = extract_storm_dataset(segs, events, lookback, horizon, UNIT)
    ranges = [brute_storm_events(r, p.wet_threshold, p.dry_gap, p.min_total_rain,
                                 p.lead_pad, p.tail_pad) for r in rains]
    expected = brute_storm_windows([len(r) for r in rains], ranges, lookback, horizon)
    assert sorted(storm.sources()) == expected
    full = build_windows(segs, lookback, horizon, UNIT)
    assert storm.sources() <= full.sources()


def test_mask_respects_segment_ids():
    segs = [seg_with_rain(np.zeros(30)), seg_with_rain(np.r_[np.zeros(10), [9.0], np.zeros(19)], 100)]
    events = detect_storms_all(segs, StormParams(lead_pad=0, tail_pad=0))
    assert [e.segment_id for e in events] == [1]
    ds = build_windows(segs, 3, 2, UNIT)
    picked = ds.subset(storm_window_mask(ds, events)).sources()
    assert picked == {(1, 6), (1, 7)}


def test_events_csv(tmp_path):
    rain = np.zeros(100)
    rain[50:52] = 4.0
    seg = seg_with_rain(rain)
    events = detect_storms(seg, StormParams())
    buf = tmp_path / "ev.csv"
    write_events_csv([seg], events, buf)
    lines = buf.read_text().splitlines()
    assert lines[0].startswith("segment")
    assert len(lines) == 2 and "2021-03-03T02:00:00Z" in lines[1]
