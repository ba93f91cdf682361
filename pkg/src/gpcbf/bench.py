"""Per-update timing of the recursive path against the batch recompute.

For each budget the bench streams the same state/measurement sequence twice:
once through the recursive update and once recomputing (inverse, dual
weights, correlation sums) from scratch after the same dataset bookkeeping.
BLAS threading is pinned to one thread so the scaling is not confounded by
thread-count changes across matrix sizes.

Three log-log slope estimates are reported per path: a least-squares fit over
all budgets, one over the three largest, and the slope of the last budget
pair.  Small budgets are dominated by fixed call overhead, so the asymptotic
order is read off the larger-budget estimates; the full fit is reported for
completeness.
"""

from __future__ import annotations

import time

import numpy as np
from threadpoolctl import threadpool_limits

from . import gp_stream
from .gp_stream import ModelConfig
from .kernel import KernelParams

DEFAULT_BUDGETS = (50, 100, 200, 400)


def _stream_data(steps: int, seed: int):
    """Smooth deterministic state path plus noisy targets."""
    rng = np.random.default_rng(seed)
    ts = np.linspace(0.0, 6.0 * np.pi, steps + 1)
    states = np.column_stack([1.4 * np.sin(ts), 1.1 * np.sin(1.9 * ts + 0.3)])
    targets = np.column_stack([np.sin(2.3 * ts), np.cos(1.1 * ts)])
    targets += rng.normal(scale=0.5, size=targets.shape)
    return states, targets


def _slope(ps, ts) -> float:
    return float(np.polyfit(np.log(ps), np.log(ts), 1)[0])


def bench_budgets(budgets=DEFAULT_BUDGETS, steps: int = 200, seed: int = 0) -> dict:
    """Timing report over ascending budgets; see the module docstring."""
    budgets = sorted(int(p) for p in budgets)
    report = {"budgets": budgets, "steps": steps, "recursive": {}, "batch": {}}
    warmup = max(10, steps // 10)
    states, targets = _stream_data(warmup + steps + 1, seed)

    with threadpool_limits(limits=1):
        for p in budgets:
            cfg = ModelConfig(budget=p, local_budget=p // 2, noise=1.0,
                              rkhs_bound=100.0,
                              kernel=KernelParams(scale=100.0, bandwidth=0.5))
            model = gp_stream.init(states[0], targets[0], cfg)
            rec_times = np.empty(steps)
            for k in range(warmup + steps):
                t0 = time.perf_counter()
                model = gp_stream.update(model, states[k + 1], targets[k + 1])
                if k >= warmup:
                    rec_times[k - warmup] = time.perf_counter() - t0

            # batch oracle: same dataset trajectory, but the state is
            # recomputed from scratch; only that recompute is timed (the
            # bookkeeping is shared by both paths)
            model_b = gp_stream.init(states[0], targets[0], cfg)
            bat_times = np.empty(steps)
            for k in range(warmup + steps):
                model_b = gp_stream.update(model_b, states[k + 1], targets[k + 1])
                if k >= warmup:
                    t0 = time.perf_counter()
                    gp_stream.direct_state(model_b.X, model_b.Y, cfg)
                    bat_times[k - warmup] = time.perf_counter() - t0

            report["recursive"][p] = _stats(rec_times)
            report["batch"][p] = _stats(bat_times)

    # slope fits use the low quantile: shared machines inflate arbitrary
    # subsets of samples, while the unloaded per-update cost is the quantity
    # with a scaling law
    for path in ("recursive", "batch"):
        q = np.array([report[path][p]["p20"] for p in budgets])
        ps = np.array(budgets, dtype=float)
        report[path + "_slope_fit"] = _slope(ps, q)
        report[path + "_slope_top3"] = _slope(ps[-3:], q[-3:]) if len(ps) >= 3 else float("nan")
        report[path + "_slope_last_pair"] = _slope(ps[-2:], q[-2:])
    p_max = budgets[-1]
    report["speedup_at_max"] = (report["batch"][p_max]["p20"]
                                / report["recursive"][p_max]["p20"])
    return report


def _stats(times: np.ndarray) -> dict:
    return {"mean": float(times.mean()), "median": float(np.median(times)),
            "p20": float(np.quantile(times, 0.2)), "max": float(times.max())}


def format_report(report: dict) -> str:
    lines = ["per-update wall time (p20 / median / mean, seconds):"]
    for p in report["budgets"]:
        r, b = report["recursive"][p], report["batch"][p]
        lines.append(f"  p={p:4d}  recursive {r['p20']:.3e} / {r['median']:.3e} / {r['mean']:.3e}"
                     f"   batch {b['p20']:.3e} / {b['median']:.3e} / {b['mean']:.3e}")
    for path in ("recursive", "batch"):
        lines.append(f"{path} log-log slope: fit={report[path + '_slope_fit']:.3f}"
                     f"  top3={report[path + '_slope_top3']:.3f}"
                     f"  last-pair={report[path + '_slope_last_pair']:.3f}")
    lines.append(f"recursive speedup at p={report['budgets'][-1]}: "
                 f"{report['speedup_at_max']:.1f}x")
    return "\n".join(lines)
