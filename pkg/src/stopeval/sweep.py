"""Grid search over stereo and detector parameters scored by stop rates.

Work is split into jobs of (stereo sub-assignment, frame); a job computes the
frame's depth once and runs every detector sub-assignment on it, so stereo is
never recomputed for grid points that differ only in detector parameters.
Jobs go through a caller-supplied ``map``; this module never starts workers.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import detector as det
from . import geometry as geo
from . import stereo
from .dataset import Dataset
from .evaluator import FrameResult, StopVerdict, Summary, evaluate_frame, fmt_rate, parse_rate, rates_from_counts

log = logging.getLogger(__name__)

SOURCES = ("stereo", "depth")
_PIPELINE_FIELDS = ("source", "far_clip_m")
_STEREO_FIELDS = tuple(f.name for f in fields(stereo.StereoParams))
_DETECTOR_FIELDS = tuple(f.name for f in fields(det.DetectorParams))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineParams:
    stereo: stereo.StereoParams = stereo.StereoParams()
    detector: det.DetectorParams = det.DetectorParams()
    source: str = "stereo"  # "stereo": match the image pair; "depth": use the stored depth map
    far_clip_m: float = 50.0

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}, got {self.source!r}")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "far_clip_m": self.far_clip_m,
            "stereo": asdict(self.stereo),
            "detector": asdict(self.detector),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineParams":
        unknown = set(d) - {"stereo", "detector", *_PIPELINE_FIELDS}
        if unknown:
            raise ConfigError(f"unknown parameter section(s): {', '.join(sorted(unknown))}")
        try:
            return cls(
                stereo=stereo.StereoParams(**d.get("stereo", {})),
                detector=det.DetectorParams(**d.get("detector", {})),
                source=d.get("source", "stereo"),
                far_clip_m=float(d.get("far_clip_m", 50.0)),
            )
        except TypeError as e:
            raise ConfigError(str(e)) from None
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def with_assignment(self, assignment: dict) -> "PipelineParams":
        st, dt, top = {}, {}, {}
        for name, value in assignment.items():
            section, key = resolve_name(name)
            {"stereo": st, "detector": dt, "pipeline": top}[section][key] = value
        try:
            return replace(self, stereo=replace(self.stereo, **st), detector=replace(self.detector, **dt), **top)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    def depth_key(self) -> tuple:
        """Everything that determines the depth map fed to the detector."""
        if self.source == "depth":
            return ("depth",)
        return ("stereo", self.far_clip_m, *astuple_sorted(self.stereo))


def astuple_sorted(obj) -> tuple:
    return tuple(sorted(asdict(obj).items()))


def resolve_name(name: str) -> tuple[str, str]:
    """Map ``block_size`` / ``stereo.block_size`` / ``source`` to (section, field)."""
    if "." in name:
        section, key = name.split(".", 1)
        table = {"stereo": _STEREO_FIELDS, "detector": _DETECTOR_FIELDS, "pipeline": _PIPELINE_FIELDS}
        if section in table and key in table[section]:
            return section, key
        raise ConfigError(f"unknown parameter {name!r}")
    hits = [s for s, t in (("stereo", _STEREO_FIELDS), ("detector", _DETECTOR_FIELDS), ("pipeline", _PIPELINE_FIELDS)) if name in t]
    if len(hits) != 1:
        raise ConfigError(f"unknown parameter {name!r}")
    return hits[0], name


def parse_value(text: str) -> Any:
    """Parse a ``--set`` value: JSON when possible, plain string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(params: PipelineParams, overrides: Iterable[str]) -> PipelineParams:
    assignment = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        assignment[k.strip()] = parse_value(v.strip())
    return params.with_assignment(assignment) if assignment else params


# -- per-frame pipeline ---------------------------------------------------------------


def frame_depth(ds: Dataset, i: int, params: PipelineParams) -> np.ndarray:
    if params.source == "depth":
        return ds.depth(i)
    left, right = ds.images(i)
    disp = stereo.match_block(left, right, params.stereo)
    return stereo.disparity_to_depth(disp, ds.rig, params.far_clip_m)


def detect_frame(ds: Dataset, i: int, params: PipelineParams) -> list[det.DetectedObstacle]:
    return det.detect(frame_depth(ds, i, params), ds.rig, params.detector)


def _frame_job(job) -> list[str]:
    """Verdicts of one frame under one depth setting and several detector settings."""
    ds, i, params, detector_list = job
    points = geo.backproject_map(ds.rig, frame_depth(ds, i, params))
    ann = ds.annotation(i)
    out = []
    for dp in detector_list:
        found = det.detect_points(points, ds.rig, dp)
        out.append(evaluate_frame(ann, found, ds.rig, ds.annotations.match).verdict.value)
    return out


def evaluate_dataset(ds: Dataset, params: PipelineParams, map_fn: Callable = map) -> list[FrameResult]:
    return list(map_fn(_evaluate_one, [(ds, i, params) for i in range(len(ds))]))


def _evaluate_one(job) -> FrameResult:
    ds, i, params = job
    found = detect_frame(ds, i, params)
    return evaluate_frame(ds.annotation(i), found, ds.rig, ds.annotations.match)


# -- grid ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterGrid:
    axes: tuple[tuple[str, tuple], ...]

    def __post_init__(self):
        axes = tuple((str(n), tuple(v)) for n, v in (self.axes.items() if isinstance(self.axes, dict) else self.axes))
        names = [n for n, _ in axes]
        for n, values in axes:
            resolve_name(n)
            if not values:
                raise ConfigError(f"axis {n!r} has no values")
        resolved = [resolve_name(n) for n in names]
        if len(set(resolved)) != len(resolved):
            raise ConfigError("two axes name the same parameter")
        object.__setattr__(self, "axes", axes)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.axes]

    def __len__(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    def assignments(self) -> list[dict]:
        return [dict(zip(self.names, combo)) for combo in itertools.product(*(v for _, v in self.axes))]


@dataclass
class SweepPoint:
    assignment: dict
    tpr: float | None
    fpr: float | None
    counts: dict
    wall_time_s: float = 0.0

    @property
    def defined(self) -> bool:
        return self.tpr is not None and self.fpr is not None

    def sort_key(self) -> tuple:
        return tuple((k, _orderable(v)) for k, v in sorted(self.assignment.items()))


def _orderable(v) -> tuple:
    if isinstance(v, (bool, int, float)):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def run_sweep(
    ds: Dataset,
    grid: ParameterGrid,
    base: PipelineParams = PipelineParams(),
    map_fn: Callable = map,
    cache: bool = True,
) -> list[SweepPoint]:
    assignments = grid.assignments()
    # validate every combination before any work starts
    plist = [base.with_assignment(a) for a in assignments]
    n = len(ds)
    if cache:
        groups: dict[tuple, list[int]] = {}
        for k, p in enumerate(plist):
            groups.setdefault(p.depth_key(), []).append(k)
        jobs, owners = [], []
        for key, members in groups.items():
            rep = plist[members[0]]
            dets = [plist[k].detector for k in members]
            for i in range(n):
                jobs.append((ds, i, rep, dets))
                owners.append(members)
    else:
        jobs, owners = [], []
        for k, p in enumerate(plist):
            for i in range(n):
                jobs.append((ds, i, p, [p.detector]))
                owners.append([k])

    counts = [Counter() for _ in plist]
    t0 = time.perf_counter()
    for members, verdicts in zip(owners, map_fn(_frame_job, jobs)):
        for k, v in zip(members, verdicts):
            counts[k][StopVerdict(v)] += 1
    elapsed = time.perf_counter() - t0

    points = []
    for a, c in zip(assignments, counts):
        s = rates_from_counts(c)
        points.append(SweepPoint(a, s.tpr, s.fpr, s.counts, elapsed / max(len(plist), 1)))
    return points


# -- frontier and selection ---------------------------------------------------------


def pareto_frontier(points: Sequence[SweepPoint]) -> list[SweepPoint]:
    """Points not dominated in (higher TPR, lower FPR), by ascending FPR."""
    pts = [p for p in points if p.defined]
    if not pts:
        if points:
            log.warning("pareto_frontier: all %d points have undefined rates", len(points))
        return []
    pts.sort(key=lambda p: (p.fpr, -p.tpr, p.sort_key()))
    front = []
    best_lower = -math.inf  # best TPR among strictly smaller FPR
    i = 0
    while i < len(pts):
        j = i
        while j < len(pts) and pts[j].fpr == pts[i].fpr:
            j += 1
        top = pts[i].tpr
        if top > best_lower:
            front.extend(p for p in pts[i:j] if p.tpr == top)
            best_lower = top
        i = j
    return front


@dataclass(frozen=True)
class Infeasible:
    """No sweep point satisfies the FPR constraint."""

    max_fpr: float

    def to_dict(self) -> dict:
        return {"feasible": False, "max_fpr": self.max_fpr}


def select_operating_point(points: Sequence[SweepPoint], max_fpr: float) -> SweepPoint | Infeasible:
    if not points:
        raise ValueError("no sweep points to select from")
    ok = [p for p in points if p.defined and p.fpr <= max_fpr]
    if not ok:
        return Infeasible(max_fpr)
    return min(ok, key=lambda p: (-p.tpr, p.fpr, p.sort_key()))


# -- files --------------------------------------------------------------------------

COUNT_COLUMNS = [v.value for v in StopVerdict]


def sweep_csv(points: Sequence[SweepPoint], names: Sequence[str] | None = None) -> str:
    names = list(names) if names is not None else (list(points[0].assignment) if points else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "tpr", "fpr", *COUNT_COLUMNS])
    for p in points:
        w.writerow(
            [json.dumps(p.assignment[n]) for n in names]
            + [fmt_rate(p.tpr), fmt_rate(p.fpr)]
            + [p.counts.get(v, 0) for v in StopVerdict]
        )
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[SweepPoint]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise ValueError("empty sweep CSV")
    ti = header.index("tpr")
    names = header[:ti]
    pts = []
    for row in reader:
        assignment = {n: json.loads(row[k]) for k, n in enumerate(names)}
        counts = {StopVerdict(c): int(row[ti + 2 + k]) for k, c in enumerate(COUNT_COLUMNS)}
        pts.append(SweepPoint(assignment, parse_rate(row[ti]), parse_rate(row[ti + 1]), counts))
    return pts


def selected_json(sel: SweepPoint | Infeasible, max_fpr: float) -> str:
    if isinstance(sel, Infeasible):
        doc = sel.to_dict()
    else:
        doc = {
            "feasible": True,
            "max_fpr": max_fpr,
            "assignment": sel.assignment,
            "tpr": sel.tpr,
            "fpr": sel.fpr,
            "counts": {v.value: sel.counts.get(v, 0) for v in StopVerdict},
        }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


@dataclass(frozen=True)
class SweepConfig:
    grid: ParameterGrid
    max_fpr: float = 0.02
    dataset: str | None = None
    base: PipelineParams = PipelineParams()

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        if "axes" not in d or not isinstance(d["axes"], dict):
            raise ConfigError("sweep config needs an 'axes' object")
        return cls(
            grid=ParameterGrid(tuple(d["axes"].items())),
            max_fpr=float(d.get("max_fpr", 0.02)),
            dataset=d.get("dataset"),
            base=PipelineParams.from_dict(d.get("base_params", {})),
        )
