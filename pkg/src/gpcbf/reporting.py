"""Trace serialization, run summaries, and per-figure data emission.

Traces go to CSV with 17 significant digits so every float64 round-trips
exactly; summaries are plain JSON and recomputable from the trace columns
alone.  Figure files are x/y column subsets of the trace, one file per
plotted quantity group, so any plotting tool can consume them.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .simulator import SimTrace

FLOAT_FMT = "%.17g"


def write_trace_csv(trace: SimTrace, path) -> None:
    path = Path(path)
    np.savetxt(path, trace.as_matrix(), fmt=FLOAT_FMT, delimiter=",",
               header=",".join(trace.names), comments="")


def read_trace_csv(path) -> SimTrace:
    path = Path(path)
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = {n: data[:, i] for i, n in enumerate(names)}
    return SimTrace(names=names, columns=cols)


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(values * values))) if values.size else math.nan


def summarize(trace: SimTrace, diagnostics=None) -> dict:
    """Key-value report of one run; every entry derives from the trace."""
    c = trace.columns
    meta = trace.meta
    t = c["t"]
    steady_time = float(meta.get("steady_time", 0.0))
    steady = t >= steady_time

    out = {
        "scenario": meta.get("scenario"),
        "case": meta.get("case"),
        "seed": meta.get("seed"),
        "rows": trace.rows,
        "duration": float(t[-1] + (t[1] - t[0]) if trace.rows > 1 else 0.0),
        "steady_time": steady_time,
        "min_psi": float(c["psi"].min()),
        "active_fraction": float(c["active"].mean()),
        "active_fraction_steady": float(c["active"][steady].mean()) if steady.any() else math.nan,
    }
    # minima of every barrier-related column
    for name in trace.names:
        if name == "psi0" or name == "psi1" or (name.startswith("phi_") and "_" in name[4:]):
            out[f"min_{name}"] = float(c[name].min())

    # bound tracking for the monitored uncertainty entries
    violations = 0
    for lab in meta.get("monitored", []):
        err, phi = c[f"err_{lab}"], c[f"phi_{lab}"]
        violations += int(np.count_nonzero(err > phi))
        out[f"min_bound_margin_{lab}"] = float((phi - err).min())
    out["bound_violations"] = violations

    # tracking error: pendulum follows the reference angle, the robot its goal
    if "gamma_d" in c:
        te = c["gamma"] - c["gamma_d"]
    elif "goal_x" in c:
        te = np.hypot(c["qx"] - c["goal_x"], c["qy"] - c["goal_y"])
    else:
        te = np.array([])
    if te.size:
        out["rms_tracking"] = _rms(te)
        out["rms_tracking_steady"] = _rms(te[steady])

    ut = c["update_time"][1:]
    ut = ut[np.isfinite(ut)]
    if ut.size:
        out["update_time_mean"] = float(ut.mean())
        out["update_time_median"] = float(np.median(ut))
        out["update_time_max"] = float(ut.max())
    if diagnostics is not None:
        out["sigma_clamps"] = diagnostics.sigma_clamps
        out["bound_clamps"] = diagnostics.bound_clamps
    else:
        for key in ("sigma_clamps", "bound_clamps"):
            if key in meta:
                out[key] = meta[key]
    return out


def write_summary(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


_PENDULUM_FIGURES = {
    "fig_states.csv": ["t", "gamma", "gamma_d", "gamma_dot", "gamma_dot_d", "u", "u_d"],
    "fig_barriers.csv": ["t", "psi0", "psi1"],
    "fig_constraint.csv": ["t", "psi"],
    "fig_estimate.csv": ["t", "mu_2", "w_2"],
    "fig_bound.csv": ["t", "phi_2", "err_2"],
}

_ROBOT_FIGURES = {
    "fig_path.csv": ["t", "qx", "qy", "goal_x", "goal_y"],
    "fig_states.csv": ["t", "qx", "qy", "gamma", "v", "omega",
                       "goal_x", "goal_y", "omega_d"],
    "fig_controls.csv": ["t", "u_r", "u_l", "u_r_d", "u_l_d"],
    "fig_barriers.csv": ["t", "min_phi_0", "min_phi_1", "psi0", "psi"],
    "fig_estimates.csv": ["t", "mu_4", "w_4", "mu_5", "w_5"],
    "fig_bounds.csv": ["t", "phi_4", "err_4", "phi_5", "err_5"],
}


def write_figure_data(trace: SimTrace, out_dir) -> list:
    """Emit per-figure column files; returns the written paths."""
    out_dir = Path(out_dir)
    spec = _PENDULUM_FIGURES if trace.meta.get("scenario") == "pendulum" else _ROBOT_FIGURES
    cols = dict(trace.columns)
    if trace.meta.get("scenario") == "robot":
        cols["min_phi_0"] = np.min([cols[f"phi_{j}_0"] for j in range(1, 6)], axis=0)
        cols["min_phi_1"] = np.min([cols[f"phi_{j}_1"] for j in range(1, 6)], axis=0)
    written = []
    for fname, names in spec.items():
        mat = np.column_stack([cols[n] for n in names])
        path = out_dir / fname
        np.savetxt(path, mat, fmt=FLOAT_FMT, delimiter=",",
                   header=",".join(names), comments="")
        written.append(path)
    return written
