"""Command-line runner.

    gpcbf run --scenario {pendulum|robot} --case {1|2|3} [--config FILE]
              [--seed N] [--out DIR]
    gpcbf bench [--budgets 50,100,200,400] [--steps N] [--out DIR]
    gpcbf verify [--fast]

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 simulation failure (a partial trace is still written).

``run`` writes trace.csv, summary.json, per-figure data files, and the
effective configuration (which reproduces the run when fed back through
``--config``).  The default output directory is ./out/<scenario>_case<k>, or
$GPCBF_OUT_DIR/<scenario>_case<k> when the environment variable is set.
"""

# Pin BLAS threading before numpy initializes: the loops here are dominated
# by small-matrix work where extra threads only add variance.
import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys
import time
from pathlib import Path

from .errors import ConfigError, SimulationFailure, UsageError

OUT_DIR_ENV = "GPCBF_OUT_DIR"

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_SIM_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpcbf", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario/case closed loop")
    run.add_argument("--scenario", help="pendulum or robot")
    run.add_argument("--case", type=int, choices=(1, 2, 3), default=None,
                     help="estimate wiring: 1 live, 2 frozen desired, 3 frozen constraint")
    run.add_argument("--config", help="INI configuration file")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", help="output directory")

    bench = sub.add_parser("bench", help="time recursive updates vs batch recompute")
    bench.add_argument("--budgets", default="50,100,200,400",
                       help="comma-separated ascending data budgets")
    bench.add_argument("--steps", type=int, default=200,
                       help="timed updates per budget")
    bench.add_argument("--out", help="directory for bench_report.json")
    bench.add_argument("--seed", type=int, default=0)

    ver = sub.add_parser("verify", help="run the property suites")
    ver.add_argument("--fast", action="store_true",
                     help="smaller sample counts (smoke test)")
    return ap


def _default_out_dir(scenario: str, case: int) -> Path:
    base = Path(os.environ.get(OUT_DIR_ENV, "out"))
    return base / f"{scenario}_case{case}"


def run_command(args) -> int:
    from . import config as config_mod
    from . import reporting, simulator

    try:
        st = config_mod.load_settings(scenario=args.scenario, case=args.case,
                                      seed=args.seed, config_path=args.config)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out) if args.out else _default_out_dir(st.scenario, st.case)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.ini").write_text(config_mod.settings_to_ini(st))

    scenario = st.build_scenario()
    print(f"running {st.scenario} case {st.case} for {st.sim.duration} s "
          f"(seed {st.seed}) -> {out_dir}")
    t0 = time.perf_counter()
    try:
        trace = simulator.run(scenario, st.case, model_config=st.model,
                              sim_config=st.sim)
    except SimulationFailure as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        if exc.trace is not None:
            reporting.write_trace_csv(exc.trace, out_dir / "trace.csv")
            print(f"partial trace ({exc.trace.rows} rows) written", file=sys.stderr)
        return EXIT_SIM_FAILED
    wall = time.perf_counter() - t0

    reporting.write_trace_csv(trace, out_dir / "trace.csv")
    summary = reporting.summarize(trace, diagnostics=None)
    summary["wall_time"] = wall
    reporting.write_summary(summary, out_dir / "summary.json")
    reporting.write_figure_data(trace, out_dir)
    print(f"done in {wall:.1f} s: min psi0 = {summary.get('min_psi0'):.4g}, "
          f"min psi = {summary['min_psi']:.4g}, "
          f"bound violations = {summary['bound_violations']}")
    return EXIT_OK


def bench_command(args) -> int:
    from .bench import bench_budgets, format_report

    try:
        budgets = [int(tok) for tok in args.budgets.split(",") if tok]
        if budgets != sorted(budgets) or len(budgets) < 2:
            raise ValueError("budgets must be >= 2 ascending integers")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = bench_budgets(budgets=budgets, steps=args.steps, seed=args.seed)
    print(format_report(report))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "bench_report.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def verify_command(args) -> int:
    from .verify import run_all

    results = run_all(fast=args.fast)
    for res in results:
        print(res)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return run_command(args)
    if args.command == "bench":
        return bench_command(args)
    return verify_command(args)


if __name__ == "__main__":
    sys.exit(main())
