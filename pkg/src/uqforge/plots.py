"""Figure rendering for study outputs.

Figures are derived strictly from the CSV files a study writes, never from
in-memory state, so they can be regenerated later from the delimited output
alone. The Agg backend is forced; everything renders headless to PNG.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIELD_TITLES = {"p": "Pressure [Pa]", "T": "Temperature [K]",
                "M": "Mach number [-]", "rho": "Density [kg/m3]"}
FIELD_ORDER = ("p", "T", "M", "rho")
DPI = 150


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _field_panels():
    fig, axes = plt.subplots(2, 2, figsize=(9.5, 6.5), sharex=True)
    fig.subplots_adjust(hspace=0.28, wspace=0.28)
    return fig, dict(zip(FIELD_ORDER, axes.ravel()))


def plot_nominal(outdir) -> str:
    """Deterministic centerline profiles at the nominal operating point."""
    header, rows = _read_rows(os.path.join(outdir, "nominal_centerline.csv"))
    data = np.array(rows, dtype=float)
    x = data[:, 0]
    fig, panels = _field_panels()
    for j, fname in enumerate(FIELD_ORDER):
        ax = panels[fname]
        ax.plot(x * 1000.0, data[:, j + 1], color="tab:blue", lw=1.5)
        ax.set_title(FIELD_TITLES[fname], fontsize=10)
        ax.grid(alpha=0.3)
    for fname in ("M", "rho"):
        panels[fname].set_xlabel("x [mm]")
    fig.suptitle("Nominal centerline solution")
    path = os.path.join(outdir, "nominal_centerline.png")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_samples(outdir) -> str:
    """All sampled centerline profiles overlaid, one panel per field."""
    header, rows = _read_rows(os.path.join(outdir, "samples_centerline.csv"))
    by_field = defaultdict(list)
    for row in rows:
        by_field[row[0]].append([float(v) for v in row[1:]])
    fig, panels = _field_panels()
    for fname in FIELD_ORDER:
        block = np.array(by_field[fname])
        x = block[:, 0] * 1000.0
        ax = panels[fname]
        ax.plot(x, block[:, 1:], color="tab:gray", lw=0.5, alpha=0.35)
        ax.set_title(FIELD_TITLES[fname], fontsize=10)
        ax.grid(alpha=0.3)
    for fname in ("M", "rho"):
        panels[fname].set_xlabel("x [mm]")
    fig.suptitle(f"Centerline solution samples (N={len(rows[0]) - 2})")
    path = os.path.join(outdir, "samples_centerline.png")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_mean_std(outdir) -> str:
    """Surrogate mean with a +-2 std band per field along the centerline."""
    header, rows = _read_rows(os.path.join(outdir, "mean_std_centerline.csv"))
    by_field = defaultdict(list)
    for fname, x, mean, std in rows:
        by_field[fname].append((float(x), float(mean), float(std)))
    fig, panels = _field_panels()
    for fname in FIELD_ORDER:
        block = np.array(by_field[fname])
        x = block[:, 0] * 1000.0
        mean, std = block[:, 1], block[:, 2]
        ax = panels[fname]
        ax.fill_between(x, mean - 2 * std, mean + 2 * std,
                        color="tab:orange", alpha=0.3, label="mean +- 2 std")
        ax.plot(x, mean, color="tab:red", lw=1.5, label="mean")
        ax.set_title(FIELD_TITLES[fname], fontsize=10)
        ax.grid(alpha=0.3)
    panels["p"].legend(fontsize=8, loc="best")
    for fname in ("M", "rho"):
        panels[fname].set_xlabel("x [mm]")
    fig.suptitle("Surrogate mean and spread along the centerline")
    path = os.path.join(outdir, "mean_std_centerline.png")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_exit_sobol(outdir) -> str:
    """Grouped bars of first-order and total indices at the exit station."""
    header, rows = _read_rows(os.path.join(outdir, "sobol_exit.csv"))
    by_field = defaultdict(list)
    for fname, pname, s1, st in rows:
        by_field[fname].append((pname, float(s1), float(st)))
    fig, panels = _field_panels()
    for fname in FIELD_ORDER:
        entries = by_field[fname]
        names = [e[0] for e in entries]
        s1 = np.array([e[1] for e in entries])
        st = np.array([e[2] for e in entries])
        pos = np.arange(len(names))
        ax = panels[fname]
        ax.bar(pos - 0.18, s1, width=0.36, label="first order")
        ax.bar(pos + 0.18, st, width=0.36, label="total")
        ax.set_xticks(pos)
        ax.set_xticklabels(names, rotation=60, fontsize=7, ha="right")
        ax.set_title(FIELD_TITLES[fname], fontsize=10)
        ax.grid(alpha=0.3, axis="y")
    panels["p"].legend(fontsize=8)
    fig.suptitle("Sensitivity indices at the nozzle exit")
    fig.subplots_adjust(bottom=0.18)
    path = os.path.join(outdir, "sobol_exit.png")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def render_study_figures(outdir) -> list[str]:
    """Render every study figure whose CSV is present; returns written paths."""
    written = []
    targets = (("nominal_centerline.csv", plot_nominal),
               ("samples_centerline.csv", plot_samples),
               ("mean_std_centerline.csv", plot_mean_std),
               ("sobol_exit.csv", plot_exit_sobol))
    for csv_name, fn in targets:
        if os.path.exists(os.path.join(outdir, csv_name)):
            written.append(fn(outdir))
    return written
