#!/usr/bin/env python3
"""Defaults vs detector-only vs stereo-only vs joint tuning on the clean suite.

Runs one joint grid (stereo axes x detector axes) and reads the four
regimes off it. Prints the best TPR at FPR <= --max-fpr for each.
"""

import argparse
import time
from pathlib import Path

from stopeval import dataset, experiments, sweep
from stopeval.evaluator import fmt_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default="data/clean", help="dataset dir (generated if missing)")
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--max-fpr", type=float, default=0.02)
    ap.add_argument("--csv", help="also write the full sweep CSV here")
    args = ap.parse_args()

    root = Path(args.data)
    if not (root / "manifest.json").exists():
        t = time.perf_counter()
        dataset.generate_dataset(experiments.clean_suite(args.frames, args.seed), root)
        print(f"generated {args.frames} frames in {time.perf_counter() - t:.1f}s")
    ds = dataset.Dataset.open(root)
    grid = experiments.regime_grid()
    t = time.perf_counter()
    points = sweep.run_sweep(ds, grid)
    print(f"{len(points)} grid points in {time.perf_counter() - t:.1f}s")
    if args.csv:
        Path(args.csv).write_text(sweep.sweep_csv(points, grid.names))

    print(f"{'regime':<16} {'TPR':>8} {'FPR':>8}  assignment")
    for row in experiments.regime_rows(points, args.max_fpr):
        if row.point is None:
            print(f"{row.name:<16} {'-':>8} {'-':>8}  (nothing within the FPR bound)")
        else:
            p = row.point
            print(f"{row.name:<16} {fmt_rate(round(p.tpr, 3)):>8} {fmt_rate(round(p.fpr, 3)):>8}  {p.assignment}")


if __name__ == "__main__":
    main()
