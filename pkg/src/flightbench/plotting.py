"""Offline figures: gnuplot-style .dat files plus PNGs rendered with matplotlib (Agg)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (8, 4.5)


def _style(ax, xlabel, ylabel):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)


def write_dat(path, columns, header: str) -> Path:
    path = Path(path)
    data = np.column_stack(columns)
    np.savetxt(path, data, header=header, fmt="%.9g")
    return path


def plot_tracking(setpoints, out_prefix) -> list[Path]:
    """Roll setpoint vs response. ``setpoints`` holds (t, roll_sp, roll) in rad."""
    arr = np.asarray(setpoints, dtype=float)
    t, sp, roll = arr[:, 0], np.degrees(arr[:, 1]), np.degrees(arr[:, 2])
    out_prefix = Path(out_prefix)
    dat = write_dat(out_prefix.with_name(out_prefix.name + "_roll.dat"), [t, sp, roll], "t roll_sp_deg roll_deg")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(t, sp, "--", lw=1.2, label="setpoint")
    ax.plot(t, roll, lw=1.0, label="roll")
    _style(ax, "time (s)", "roll (deg)")
    ax.legend(loc="upper right")
    png = out_prefix.with_name(out_prefix.name + "_roll.png")
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return [dat, png]


def plot_outputs(trajectory_csv, out_prefix, channels=range(4)) -> Path:
    data = np.genfromtxt(trajectory_csv, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for c in channels:
        ax.plot(data["t"], data[f"delta{c}"], lw=0.8, label=f"ch {c}")
    _style(ax, "time (s)", "throttle")
    ax.legend(loc="upper right", ncol=len(list(channels)))
    out_prefix = Path(out_prefix)
    png = out_prefix.with_name(out_prefix.name + "_outputs.png")
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return png


def plot_rtt_histogram(samples_ms, out_prefix, label: str = "") -> list[Path]:
    s = np.asarray(samples_ms, dtype=float)
    out_prefix = Path(out_prefix)
    dat = write_dat(out_prefix.with_name(out_prefix.name + "_rtt.dat"), [np.arange(s.size), s], "index rtt_ms")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    bins = max(10, min(200, int(math.sqrt(s.size))))
    ax.hist(s, bins=bins, label=label or None)
    ax.set_yscale("log")
    _style(ax, "RTT (ms)", "count")
    if label:
        ax.legend()
    png = out_prefix.with_name(out_prefix.name + "_rtt.png")
    fig.tight_layout()
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return [dat, png]
