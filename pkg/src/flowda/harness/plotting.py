"""RMSE-vs-T report figures rendered to SVG next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..core import ConfigurationError

# keep SVG ids stable so re-renders of identical data diff cleanly
matplotlib.rcParams["svg.hashsalt"] = "flowda"


def _series_label(key) -> str:
    filter_name, flow, guidance = key
    if filter_name == "enff":
        parts = ["enff", flow or "?", guidance or "?"]
        return "-".join(p for p in parts if p)
    return filter_name


def emit_plot(records, path: str | Path, title: str | None = None) -> Path:
    """RMSE-vs-T line chart: one series per filter variant, log-x in T,
    min/max band over seeds, divergences marked and excluded from the band.
    """
    records = list(records)
    if not records:
        raise ConfigurationError("no records to plot")
    groups: dict[tuple, dict[int, list]] = {}
    for r in records:
        key = (r.filter_name, r.flow, r.guidance)
        groups.setdefault(key, {}).setdefault(int(r.sampling_steps), []).append(r)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    any_finite = False
    for idx, (key, by_T) in enumerate(sorted(groups.items())):
        color = f"C{idx % 10}"
        ts, lo, hi, mid = [], [], [], []
        div_ts = []
        for T in sorted(by_T):
            vals = [r.summary_rmse for r in by_T[T] if np.isfinite(r.summary_rmse)]
            if any(not np.isfinite(r.summary_rmse) for r in by_T[T]):
                div_ts.append(T)
            if vals:
                ts.append(T)
                lo.append(min(vals))
                hi.append(max(vals))
                mid.append(float(np.mean(vals)))
        label = _series_label(key)
        if ts:
            any_finite = True
            ax.plot(ts, mid, marker="o", color=color, label=label)
            ax.fill_between(ts, lo, hi, alpha=0.2, color=color)
        if div_ts:
            top = max(hi) if hi else 1.0
            ax.plot(div_ts, [top] * len(div_ts), linestyle="none", marker="x",
                    markersize=9, color=color,
                    label=None if ts else f"{label} (diverged)")
    all_ts = [int(r.sampling_steps) for r in records]
    if any_finite and min(all_ts) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("sampling steps T")
    ax.set_ylabel("summary RMSE (last 50 analyses)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
