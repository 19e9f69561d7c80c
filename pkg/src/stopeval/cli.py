"""Command-line front end: generate | detect | evaluate | sweep | report.

Exit codes: 0 success, 2 usage/configuration error, 3 data or format error,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from . import dataset as dsmod
from . import imageio
from .evaluator import AnnotationError, aggregate, fmt_rate, report_csv
from .geometry import CameraRig
from .sweep import (
    ConfigError,
    PipelineParams,
    SweepConfig,
    apply_overrides,
    detect_frame,
    evaluate_dataset,
    pareto_frontier,
    read_sweep_csv,
    run_sweep,
    select_operating_point,
    selected_json,
    sweep_csv,
)

log = logging.getLogger("stopeval")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


@contextmanager
def worker_map(jobs: int):
    """``map`` over a process pool of ``jobs`` workers; ordered, so results never depend on N."""
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        yield lambda fn, items: ex.map(fn, list(items), chunksize=4)


def _resolve(path: str | None, root: Path | None) -> Path | None:
    """Flag paths are relative to the manifest root; fall back to the working directory."""
    if path is None:
        return None
    p = Path(path)
    if p.is_absolute() or root is None:
        return p
    return root / p if (root / p).exists() or not p.exists() else p


def _load_params(args, root: Path | None, base: PipelineParams | None = None) -> PipelineParams:
    params = base or PipelineParams()
    pfile = _resolve(args.params, root)
    if pfile is not None:
        try:
            params = PipelineParams.from_dict(json.loads(pfile.read_text()))
        except FileNotFoundError:
            raise ConfigError(f"params file not found: {pfile}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{pfile}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return apply_overrides(params, args.set or [])


def _open_dataset(args) -> dsmod.Dataset:
    ds = dsmod.Dataset.open(args.manifest)
    calib = _resolve(args.calib, ds.manifest.root)
    if calib is not None:
        ds.rig = CameraRig.load(calib)
    return ds


def cmd_generate(args) -> int:
    suite = dsmod.load_suite(args.suite)
    rig = CameraRig.load(args.calib) if args.calib else None
    m = dsmod.generate_dataset(suite, args.output, rig=rig, seed=args.seed)
    print(f"generated {len(m.frames)} frames in {m.root}")
    return EXIT_OK


def cmd_detect(args) -> int:
    ds = _open_dataset(args)
    params = _load_params(args, ds.manifest.root)
    with worker_map(args.jobs) as pmap:
        found = list(pmap(_detect_job, [(ds, i, params) for i in range(len(ds))]))
    doc = {fid: [o.to_dict() for o in obs] for fid, obs in zip(ds.frame_ids, found)}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _detect_job(job):
    return detect_frame(*job)


def cmd_evaluate(args) -> int:
    ds = _open_dataset(args)
    params = _load_params(args, ds.manifest.root)
    with worker_map(args.jobs) as pmap:
        results = evaluate_dataset(ds, params, pmap)
    if not results:
        raise dsmod.DatasetError("dataset has no frames")
    s = aggregate(results)
    if args.format == "json":
        text = json.dumps(
            {
                "frames": [
                    {"frame_id": r.frame_id, "verdict": r.verdict.value, "n_tp": r.n_tp, "n_fp": r.n_fp, "n_fn": r.n_fn}
                    for r in results
                ],
                "summary": {"tpr": s.tpr, "fpr": s.fpr, "counts": {k.value: v for k, v in s.counts.items()}},
            },
            indent=1,
        ) + "\n"
    else:
        text = report_csv(results)
    if args.report:
        Path(args.report).write_text(text)
    print(f"frames={s.n_frames} TPR={fmt_rate(s.tpr)} FPR={fmt_rate(s.fpr)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cpath = Path(args.config)
    try:
        cfg = SweepConfig.from_dict(json.loads(cpath.read_text()))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{cpath}: line {e.lineno} column {e.colno}: {e.msg}") from None
    manifest = args.manifest or (str(cpath.parent / cfg.dataset) if cfg.dataset else None)
    if manifest is None:
        raise ConfigError("no dataset: pass --manifest or set 'dataset' in the sweep config")
    args.manifest = manifest
    ds = _open_dataset(args)
    base = _load_params(args, ds.manifest.root, cfg.base)
    max_fpr = args.max_fpr if args.max_fpr is not None else cfg.max_fpr
    with worker_map(args.jobs) as pmap:
        points = run_sweep(ds, cfg.grid, base, pmap, cache=not args.no_cache)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(points, cfg.grid.names))
    (out / "frontier.csv").write_text(sweep_csv(pareto_frontier(points), cfg.grid.names))
    sel = select_operating_point(points, max_fpr)
    (out / "selected.json").write_text(selected_json(sel, max_fpr))
    print(f"{len(points)} points; selected: " + selected_json(sel, max_fpr).replace("\n", " "))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        points = read_sweep_csv(Path(args.sweep_csv).read_text())
    except (ValueError, KeyError, IndexError) as e:
        raise imageio.FormatError(f"{args.sweep_csv}: not a sweep CSV ({e})") from None
    if not points:
        raise imageio.FormatError(f"{args.sweep_csv}: no sweep points")
    front = pareto_frontier(points)
    sel = select_operating_point(points, args.max_fpr)
    if args.format == "json":
        doc = {
            "frontier": [{"assignment": p.assignment, "tpr": p.tpr, "fpr": p.fpr} for p in front],
            "selected": json.loads(selected_json(sel, args.max_fpr)),
        }
        sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        sys.stdout.write(sweep_csv(front, list(points[0].assignment)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stopeval", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, manifest=True):
        if manifest:
            sp.add_argument("manifest", help="dataset manifest.json or its directory")
        sp.add_argument("--calib", help="calibration JSON overriding the dataset's")
        sp.add_argument("--params", help="pipeline parameter JSON")
        sp.add_argument("--set", action="append", metavar="K=V", help="parameter override (repeatable)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=["csv", "json"], default="csv")

    g = sub.add_parser("generate", help="render a synthetic dataset from a scene suite")
    g.add_argument("suite")
    g.add_argument("output")
    common(g, manifest=False)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("detect", help="dump per-frame detections as JSON")
    common(d)
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evaluate", help="stop verdicts per frame and TPR/FPR")
    common(e)
    e.add_argument("--report", help="report path (CSV or JSON per --format)")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="grid search and operating-point selection")
    s.add_argument("config")
    s.add_argument("output", help="directory for sweep.csv, frontier.csv, selected.json")
    s.add_argument("--manifest")
    s.add_argument("--max-fpr", type=float)
    s.add_argument("--no-cache", action="store_true", help="recompute stereo for every grid point")
    common(s, manifest=False)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="frontier and selection from a sweep CSV")
    r.add_argument("sweep_csv")
    r.add_argument("--max-fpr", type=float, default=0.02)
    r.add_argument("--format", choices=["csv", "json"], default="csv")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (dsmod.DatasetError, AnnotationError, imageio.FormatError, KeyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # anything else is a bug, not bad input
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
