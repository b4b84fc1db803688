"""Static SVG of observed vs full-trained vs storm-trained forecasts."""
from __future__ import annotations

import numpy as np


def _lead_series(result, step: int):
    """Forecast issued ``step`` hours ahead, keyed by target hour."""
    times = result.origins + np.timedelta64(step, "h")
    return times, result.pred[:, step - 1], result.obs[:, step - 1]


def choose_window(result, events, test_segments, hours: int):
    """Plot span centred on the wettest test storm, else the test start."""
    if len(result) == 0:
        return None
    first, last = result.origins[0], result.origins[-1]
    if events:
        ev = max(events, key=lambda e: (e.total_rain, -e.segment_id, -e.start_index))
        centre = test_segments[ev.segment_id].timestamps[ev.core_start]
        lo = centre - np.timedelta64(hours // 3, "h")
    else:
        lo = first
    lo = max(first, min(lo, last - np.timedelta64(hours, "h")))
    return lo, lo + np.timedelta64(hours, "h")


def plot_comparison(path, full_result, storm_result, events, test_segments,
                    step: int, hours: int = 336, title: str = "") -> None:
    """Write a three-trace SVG; byte-identical for identical inputs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "gwlcast"
    fig, ax = plt.subplots(figsize=(10, 4))
    span = choose_window(full_result, events, test_segments, hours)
    if span is not None:
        t_f, p_f, obs = _lead_series(full_result, step)
        t_s, p_s, _ = _lead_series(storm_result, step)
        sel = (t_f >= span[0]) & (t_f <= span[1])
        x = (t_f[sel] - span[0]).astype(np.int64)
        ax.plot(x, obs[sel], color="black", lw=1.2, label="Observed GWL")
        ax.plot(x, p_f[sel], color="tab:blue", lw=1.0, label="Full Forecast")
        ax.plot(x, p_s[sel], color="tab:red", lw=1.0, ls="--", label="Storm Forecast")
        start = np.datetime_as_string(span[0], unit="h")
        ax.set_xlabel(f"hours since {start}:00Z ({step} h ahead forecasts)")
    else:
        ax.text(0.5, 0.5, "no test origins", ha="center", va="center", transform=ax.transAxes)
        ax.set_xlabel("hours")
    ax.set_ylabel("groundwater table (m)")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
