"""
Charts
Static SVG charts of a comparison report: one bar chart per headline metric,
speed-bin grouped bars and stopped time over the episode. Every chart draws
its data as a table under the plot and repeats it as JSON in the SVG
Description metadata.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from trafficlab.harness import HEADLINE_METRICS  # noqa: E402
from trafficlab.metrics import BIN_LABELS  # noqa: E402

LOG = logging.getLogger(__name__)

COLORS = {"baseline": "#9e9e9e", "model": "#1f77b4"}
TITLES = {
    "serious_collisions": "Serious collisions",
    "vv_collisions": "Vehicle-vehicle collisions",
    "vnv_collisions": "Vehicle-obstacle collisions",
    "distance_total": "Distance per vehicle",
    "stopped_total": "Stopped time per vehicle (s)",
    "bin_25_30": "Time at 25-30 units/s (s)",
    "fuel_gal_per_mile": "Fuel (gal/mile)",
    "co2_g_per_mile": "CO2 (g/mile)",
}

plt.rcParams["svg.hashsalt"] = "trafficlab"


def _save(fig, path, table):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Description": json.dumps(table, sort_keys=True), "Date": None,
            "Title": path.stem}
    fig.savefig(path, format="svg", metadata=meta, bbox_inches="tight")
    plt.close(fig)
    LOG.debug("chart %s", path)
    return path


def _fmt(value):
    return f"{value:.6g}"


def metric_bar_chart(row, path):
    """Baseline vs model bars for one report row."""
    values = [float(row["baseline_mean"]), float(row["model_mean"])]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.bar(["baseline", "model"], values, color=[COLORS["baseline"], COLORS["model"]])
    ax.set_title(TITLES.get(row["metric"], row["metric"]))
    ax.set_xticks([])
    ax.table(cellText=[[_fmt(v) for v in values] + [f"{float(row['percent_change']):+.2f}%",
                                                     f"{float(row['p_value']):.3g}"]],
             colLabels=["baseline", "model", "change", "p"], loc="bottom")
    table = {"metric": row["metric"], "baseline": values[0], "model": values[1],
             "percent_change": float(row["percent_change"]), "p_value": float(row["p_value"])}
    return _save(fig, path, table)


def speed_bin_chart(report, path):
    """Grouped bars of mean seconds per speed bin; an empty bin is a zero-height bar."""
    base = [float(report.row(b)["baseline_mean"]) for b in BIN_LABELS]
    model = [float(report.row(b)["model_mean"]) for b in BIN_LABELS]
    x = np.arange(len(BIN_LABELS))
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.bar(x - 0.2, base, width=0.4, color=COLORS["baseline"], label="baseline")
    ax.bar(x + 0.2, model, width=0.4, color=COLORS["model"], label="model")
    ax.set_xticks([])
    ax.set_title("Time per speed bin (s per vehicle)")
    ax.legend()
    labels = [b.removeprefix("bin_").replace("_", "-") for b in BIN_LABELS]
    ax.table(cellText=[[_fmt(v) for v in base], [_fmt(v) for v in model]],
             rowLabels=["baseline", "model"], colLabels=labels, loc="bottom")
    table = {"bins": list(BIN_LABELS), "baseline": base, "model": model}
    return _save(fig, path, table)


def _mean_timeline(directory):
    frames = [pd.read_csv(p) for p in sorted(Path(directory).glob("timeline_seed*.csv"))]
    if not frames:
        return pd.DataFrame(columns=["time", "mean_stopped_total"])
    frame = pd.concat(frames, ignore_index=True)
    return frame.groupby("time", as_index=False)["mean_stopped_total"].mean()


def stopped_timeline_chart(metrics_dirs, path):
    """Mean stopped time per vehicle at each decision, averaged over seeds."""
    fig, ax = plt.subplots(figsize=(8, 5))
    table = {}
    for label, directory in metrics_dirs.items():
        t = _mean_timeline(directory)
        ax.plot(t["time"], t["mean_stopped_total"], marker="o", label=label,
                color=COLORS.get(label))
        table[label] = {"time": t["time"].astype(float).tolist(),
                        "mean_stopped_total": t["mean_stopped_total"].astype(float).tolist()}
    ax.set_xlabel("simulated time (s)")
    ax.set_ylabel("mean stopped time (s)")
    ax.set_title("Stopped time over the episode")
    ax.legend()
    rows = [[label] + [_fmt(v) for v in d["mean_stopped_total"]] for label, d in table.items()]
    if rows and len(rows[0]) > 1:
        width = max(len(r) for r in rows)
        rows = [r + [""] * (width - len(r)) for r in rows]
        ax.table(cellText=rows, loc="bottom", bbox=[0.0, -0.45, 1.0, 0.25])
    return _save(fig, path, table)


def render_charts(report, metrics_dirs, out_dir):
    """All charts for `report`; `metrics_dirs` maps "baseline"/"model" to run directories."""
    out = Path(out_dir)
    paths = [metric_bar_chart(report.row(m), out / f"{m}.svg") for m in HEADLINE_METRICS]
    paths.append(speed_bin_chart(report, out / "speed_bins.svg"))
    paths.append(stopped_timeline_chart(metrics_dirs, out / "stopped_timeline.svg"))
    LOG.info("wrote %d charts to %s", len(paths), out)
    return paths
