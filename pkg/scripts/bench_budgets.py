#!/usr/bin/env python3
"""Complexity study: recursive update vs batch recompute over data budgets."""

import argparse
import json
from pathlib import Path

from gpcbf.bench import bench_budgets, format_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budgets", default="50,100,200,400")
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write bench_report.json here")
    args = ap.parse_args()

    report = bench_budgets(budgets=[int(p) for p in args.budgets.split(",")],
                           steps=args.steps, seed=args.seed)
    print(format_report(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench_report.json").write_text(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main()
