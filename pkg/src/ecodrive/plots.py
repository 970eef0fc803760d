"""Plot-data emission: time-speed and time-distance series with signal phase
labels, and improvement heat maps.  CSV files carry the data; matplotlib
figures are rendered alongside them."""

from __future__ import annotations

import csv
import io
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .episode import TrajectoryLog
from .harness import ENTRY_SPEEDS_KPH, ENTRY_TIMES, ImprovementRow, heatmap_matrix

PHASE_COLORS = {"green": "tab:green", "yellow": "gold",
                "red": "tab:red", "all_red": "darkred"}


def series_csv(log: TrajectoryLog, which: str) -> str:
    """Time-speed or time-distance series with per-timestamp phase labels."""
    if which not in ("speed", "distance"):
        raise ValueError("which must be 'speed' or 'distance'")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", which, "phase"])
    for r in log.rows:
        value = r.v if which == "speed" else r.x_lon
        writer.writerow([f"{r.t:.2f}", f"{value:.6f}", r.phase])
    return buf.getvalue()


def _series_png(log: TrajectoryLog, which: str, path: str) -> None:
    t = np.array([r.t for r in log.rows])
    y = np.array([r.v if which == "speed" else r.x_lon for r in log.rows])
    phases = [r.phase for r in log.rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    start = 0
    for i in range(1, len(t) + 1):
        if i == len(t) or phases[i] != phases[start]:
            ax.plot(t[start:i], y[start:i],
                    color=PHASE_COLORS.get(phases[start], "gray"))
            start = i
    ax.set_xlabel("time [s]")
    ax.set_ylabel("speed [m/s]" if which == "speed" else "distance [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def heatmap_csv(matrix: np.ndarray,
                entry_times=ENTRY_TIMES, entry_speeds=ENTRY_SPEEDS_KPH) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["C"] + [f"S{s}" for s in entry_speeds])
    for c, row in zip(entry_times, matrix):
        writer.writerow([f"C{c}"] + [f"{v:.6f}" for v in row])
    return buf.getvalue()


def _heatmap_png(matrix: np.ndarray, title: str, path: str,
                 entry_times=ENTRY_TIMES, entry_speeds=ENTRY_SPEEDS_KPH) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(matrix, cmap="RdYlGn", aspect="auto")
    ax.set_xticks(range(len(entry_speeds)),
                  [f"S{s}" for s in entry_speeds])
    ax.set_yticks(range(len(entry_times)), [f"C{c}" for c in entry_times])
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="improvement [%]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_plot_data(out_dir: str,
                   logs: dict[tuple, TrajectoryLog],
                   improvements: list[ImprovementRow] | None = None) -> list[str]:
    """Write series CSVs + PNGs for each log and, when improvements are
    given, heat-map CSVs + PNGs per method and metric; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    for key, log in logs.items():
        tag = "_".join(str(k) for k in key)
        for which in ("speed", "distance"):
            csv_path = os.path.join(out_dir, f"{tag}_{which}.csv")
            with open(csv_path, "w") as fh:
                fh.write(series_csv(log, which))
            png_path = os.path.join(out_dir, f"{tag}_{which}.png")
            _series_png(log, which, png_path)
            written += [csv_path, png_path]
    if improvements:
        methods = sorted({r.method for r in improvements})
        for method in methods:
            for metric in ("energy", "time"):
                mat = heatmap_matrix(improvements, method, metric)
                csv_path = os.path.join(out_dir, f"heatmap_{method}_{metric}.csv")
                with open(csv_path, "w") as fh:
                    fh.write(heatmap_csv(mat))
                png_path = os.path.join(out_dir, f"heatmap_{method}_{metric}.png")
                _heatmap_png(mat, f"{method} {metric} improvement vs IDM",
                             png_path)
                written += [csv_path, png_path]
    return written
