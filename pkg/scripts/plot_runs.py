#!/usr/bin/env python3
"""Render the emitted figure data of one or more runs with matplotlib.

Usage: plot_runs.py out/pendulum_case1 [out/robot_case1 ...]
Each run directory gets a plots/ subdirectory with one PNG per figure file.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def plot_figure_file(path: Path, out_dir: Path):
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    if path.stem == "fig_path":
        ax.plot(data[:, names.index("qx")], data[:, names.index("qy")], lw=1.0)
        ax.plot(data[:, names.index("goal_x")], data[:, names.index("goal_y")],
                "x", ms=4, label="goals")
        ax.set_xlabel("qx [m]")
        ax.set_ylabel("qy [m]")
        ax.set_aspect("equal")
    else:
        t = data[:, 0]
        for i, name in enumerate(names[1:], start=1):
            style = "--" if name.endswith("_d") or name.startswith(("w_", "err_")) else "-"
            ax.plot(t, data[:, i], style, lw=0.9, label=name)
        ax.set_xlabel("t [s]")
    ax.legend(fontsize=7, ncol=3)
    ax.set_title(f"{path.parent.name}: {path.stem}")
    fig.tight_layout()
    fig.savefig(out_dir / f"{path.stem}.png", dpi=140)
    plt.close(fig)


def main():
    if len(sys.argv) < 2:
        raise SystemExit(__doc__)
    for run_dir in map(Path, sys.argv[1:]):
        out_dir = run_dir / "plots"
        out_dir.mkdir(exist_ok=True)
        for path in sorted(run_dir.glob("fig_*.csv")):
            plot_figure_file(path, out_dir)
            print(f"wrote {out_dir / (path.stem + '.png')}")


if __name__ == "__main__":
    main()
