#!/usr/bin/env python3
"""Write a scene-suite JSON for ``stopeval generate``.

    python scripts/make_suite.py clean data/clean_suite.json
    python scripts/make_suite.py reflective data/reflective_suite.json --frames 100
"""

import argparse
import json
from pathlib import Path

from stopeval import dataset, experiments

PRESETS = {"clean": experiments.clean_suite, "reflective": experiments.reflective_suite}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("preset", choices=sorted(PRESETS))
    ap.add_argument("output")
    ap.add_argument("--frames", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    kw = {k: v for k, v in (("n_frames", args.frames), ("seed", args.seed)) if v is not None}
    suite = PRESETS[args.preset](**kw)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(dataset.suite_to_doc(suite), indent=1) + "\n")
    print(f"{len(suite.scenes)} scenes -> {out}")


if __name__ == "__main__":
    main()
