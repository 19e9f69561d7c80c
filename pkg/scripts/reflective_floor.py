#!/usr/bin/env python3
"""Glossy-floor stress test: defaults vs the best swept detector setting.

Depth maps carry 20% dropout and floor reflections on 30% of ground pixels.
"""

import argparse
from pathlib import Path

from stopeval import dataset, experiments, sweep
from stopeval.evaluator import aggregate, fmt_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default="data/reflective")
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--max-fpr", type=float, default=0.02)
    args = ap.parse_args()

    root = Path(args.data)
    if not (root / "manifest.json").exists():
        dataset.generate_dataset(experiments.reflective_suite(args.frames, args.seed), root)
    ds = dataset.Dataset.open(root)

    s = aggregate(sweep.evaluate_dataset(ds, experiments.DEPTH_DEFAULTS))
    print(f"defaults: TPR={fmt_rate(s.tpr)} FPR={fmt_rate(s.fpr)}")

    grid = sweep.ParameterGrid(experiments.REFLECTIVE_AXES)
    points = sweep.run_sweep(ds, grid, experiments.DEPTH_DEFAULTS)
    print("frontier:")
    for p in sweep.pareto_frontier(points):
        print(f"  TPR={p.tpr:.3f} FPR={p.fpr:.3f}  {p.assignment}")
    sel = sweep.select_operating_point(points, args.max_fpr)
    print("selected:", sweep.selected_json(sel, args.max_fpr).replace("\n", " "))


if __name__ == "__main__":
    main()
