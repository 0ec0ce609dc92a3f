"""Batch figure generation from rendezvous experiment CSVs.

Consumes the experiment tool's CSV schemas only; never mutates its inputs.
All figures are deterministic for identical inputs: fixed style cycles, no
randomness, static image output.

Expected schemas:

* trajectory CSV: t,rx,ry,rz,vx,vy,vz
* actuation CSV: k,s1..sM,solve_time,iterations,status
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

TRAJECTORY_COLUMNS = ["t", "rx", "ry", "rz", "vx", "vy", "vz"]

#: deterministic per-series styling; cycles if more series are given
SERIES_COLORS = ("tab:blue", "tab:red", "tab:orange", "tab:green", "tab:purple", "tab:brown")

#: thrusters acting in the zx plane for the default six-thruster layout
#: (1-based indices; 2 and 5 act along y)
ZX_PLANE_THRUSTERS = (1, 3, 4, 6)


class SchemaError(ValueError):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: inputs, kind, labels/limits, output path."""

    inputs: tuple[str, ...]
    kind: str  # trajectory | actuation | histogram | profile
    output: str
    labels: tuple[str, ...] = ()
    title: str = ""
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    sampling_period: float = 10.0
    thrusters: tuple[int, ...] = ()  # 1-based subset for actuation rasters
    mission_times: tuple[float, ...] = ()
    bins: int = 40

    def __post_init__(self):
        if self.kind not in ("trajectory", "actuation", "histogram", "profile", "timing"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("figure needs at least one input CSV")

    def label_for(self, index: int) -> str:
        if index < len(self.labels):
            return self.labels[index]
        return Path(self.inputs[index]).stem


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    """Times and (N, 6) states from a trajectory CSV."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_COLUMNS:
            raise SchemaError(
                f"{path}: expected columns {TRAJECTORY_COLUMNS}, found {header}"
            )
        rows = [[float(cell) for cell in row] for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: trajectory CSV has no data rows")
    data = np.array(rows)
    return data[:, 0], data[:, 1:]


def read_actuation(path) -> dict:
    """Pulse matrix and solver diagnostics from an actuation CSV."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if (
            not header
            or header[0] != "k"
            or header[-3:] != ["solve_time", "iterations", "status"]
            or any(not name.startswith("s") for name in header[1:-3])
        ):
            raise SchemaError(f"{path}: not an actuation CSV (header {header})")
        m = len(header) - 4
        if m < 1:
            raise SchemaError(f"{path}: actuation CSV has no thruster columns")
        steps, pulses, solve_times = [], [], []
        for row in reader:
            if not row:
                continue
            steps.append(int(row[0]))
            pulses.append([float(cell) for cell in row[1 : 1 + m]])
            solve_times.append(float(row[1 + m]))
    if not steps:
        raise SchemaError(f"{path}: actuation CSV has no data rows")
    return {
        "k": np.array(steps, dtype=int),
        "pulses": np.array(pulses),
        "solve_time": np.array(solve_times),
    }


def _finish(fig, ax, spec: FigureSpec) -> str:
    if spec.title:
        ax.set_title(spec.title)
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return str(out)


def plot_trajectory(spec: FigureSpec) -> str:
    """zx-plane path per run with a cross at the start and a circle at the
    target (the LVLH origin)."""
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    for i, path in enumerate(spec.inputs):
        _, states = read_trajectory(path)
        z_km = states[:, 2] / 1e3
        x_km = states[:, 0] / 1e3
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        ax.plot(z_km, x_km, color=color, linewidth=1.2, label=spec.label_for(i))
        ax.plot(z_km[0], x_km[0], marker="x", color="black", markersize=9)
    ax.plot(0.0, 0.0, marker="o", markerfacecolor="none", markeredgecolor="black", markersize=9)
    ax.set_xlabel("z [km]")
    ax.set_ylabel("x [km]")
    ax.grid(True, alpha=0.3)
    if len(spec.inputs) > 1 or spec.labels:
        ax.legend()
    return _finish(fig, ax, spec)


def plot_actuation(spec: FigureSpec) -> str:
    """Per-thruster horizontal raster of activation intervals vs time.

    A bar from t = k*h spanning the commanded duration marks each firing;
    `thrusters` restricts the rows (e.g. to the zx-plane subset).
    """
    if len(spec.inputs) != 1:
        raise ValueError("actuation raster takes exactly one input CSV")
    log = read_actuation(spec.inputs[0])
    pulses = log["pulses"]
    m = pulses.shape[1]
    selected = spec.thrusters or tuple(range(1, m + 1))
    for idx in selected:
        if not 1 <= idx <= m:
            raise SchemaError(f"thruster index {idx} outside 1..{m}")
    fig, ax = plt.subplots(figsize=(5.2, 0.55 * len(selected) + 1.6))
    h = spec.sampling_period
    for row, idx in enumerate(selected):
        durations = pulses[:, idx - 1]
        fired = np.flatnonzero(durations > 0.0)
        starts = log["k"][fired] * h
        color = SERIES_COLORS[row % len(SERIES_COLORS)]
        ax.broken_barh(
            list(zip(starts, durations[fired])), (row + 0.6, 0.8), color=color
        )
    ax.set_yticks([row + 1.0 for row in range(len(selected))])
    ax.set_yticklabels([f"thruster {idx}" for idx in selected])
    ax.set_ylim(0.4, len(selected) + 0.6)
    ax.set_xlabel("t [s]")
    ax.grid(True, axis="x", alpha=0.3)
    return _finish(fig, ax, spec)


def plot_timing(spec: FigureSpec, kind: str) -> str:
    """Solve-time histogram per series, or the temporal mean-profile with
    mission-time (dash-dotted) and max (dotted) markers."""
    series = []
    for i, path in enumerate(spec.inputs):
        log = read_actuation(path)
        series.append((spec.label_for(i), log["solve_time"] * 1e3))

    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    if kind == "histogram":
        low = min(values.min() for _, values in series)
        high = max(values.max() for _, values in series)
        edges = np.linspace(low, high * 1.0001, spec.bins + 1)
        for i, (label, values) in enumerate(series):
            color = SERIES_COLORS[i % len(SERIES_COLORS)]
            ax.hist(values, bins=edges, alpha=0.55, color=color, label=label)
            ax.axvline(values.mean(), color=color, linestyle="-.", linewidth=1.2)
        ax.set_xlabel("solve time [ms]")
        ax.set_ylabel("count")
    else:
        for i, (label, values) in enumerate(series):
            color = SERIES_COLORS[i % len(SERIES_COLORS)]
            t = np.arange(len(values)) * spec.sampling_period
            ax.plot(t, values, color=color, linewidth=1.0, label=label)
            ax.axhline(values.max(), color=color, linestyle=":", linewidth=1.0)
        for i, mission in enumerate(spec.mission_times):
            color = SERIES_COLORS[i % len(SERIES_COLORS)]
            ax.axvline(mission, color=color, linestyle="-.", linewidth=1.2)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("solve time [ms]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _finish(fig, ax, spec)


def render(spec: FigureSpec) -> str:
    """Dispatch a FigureSpec to its renderer; returns the output path."""
    if spec.kind == "trajectory":
        return plot_trajectory(spec)
    if spec.kind == "actuation":
        return plot_actuation(spec)
    if spec.kind in ("histogram", "timing"):
        return plot_timing(spec, "histogram")
    return plot_timing(spec, "profile")
