"""Stop-decision quality metric.

Marked (ground truth) and detected obstacles are fronto-parallel rectangles in
the level-rectified image, each carrying a forward distance. A marked obstacle
and a detection match when their rectangles intersect and the relative depth
error, measured against the marked distance, is below ``T``. Only obstacles
inside the driving corridor decide the frame's stop verdict.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geometry as geo

Rect = tuple[float, float, float, float]  # (u0, v0, u1, v1), u0 < u1, v0 < v1


class AnnotationError(ValueError):
    pass


class Label(str, enum.Enum):
    TP = "TP"
    FP = "FP"
    FN = "FN"
    ABSORBED = "absorbed"  # detection inside a zone of indifference


class StopVerdict(str, enum.Enum):
    TRUE_POSITIVE = "TruePositiveStop"
    FALSE_POSITIVE = "FalsePositiveStop"
    FALSE_NEGATIVE = "FalseNegativeStop"
    TRUE_NEGATIVE = "TrueNegative"


def _check_rect(rect) -> Rect:
    r = tuple(float(c) for c in rect)
    if len(r) != 4 or not (r[0] < r[2] and r[1] < r[3]) or not np.all(np.isfinite(r)):
        raise ValueError(f"degenerate rectangle {rect}")
    return r


@dataclass(frozen=True)
class MarkedObstacle:
    rect_px: Rect
    z_ref: float

    def __post_init__(self):
        object.__setattr__(self, "rect_px", _check_rect(self.rect_px))
        if not self.z_ref > 0:
            raise ValueError(f"z_ref must be positive, got {self.z_ref}")


@dataclass(frozen=True)
class IndifferenceZone:
    polygon_px: tuple[tuple[float, float], ...]

    def __post_init__(self):
        poly = tuple((float(u), float(v)) for u, v in self.polygon_px)
        if len(poly) < 3:
            raise ValueError("indifference polygon needs at least 3 vertices")
        if not is_simple_polygon(poly):
            raise ValueError("indifference polygon must be simple")
        object.__setattr__(self, "polygon_px", poly)


@dataclass(frozen=True)
class DrivingCorridor:
    width_m: float = 2.5
    length_m: float = 7.0

    def __post_init__(self):
        if not (self.width_m > 0 and self.length_m > 0):
            raise ValueError("corridor width and length must be positive")


@dataclass(frozen=True)
class MatchConfig:
    T: float = 0.25

    def __post_init__(self):
        if not 0 < self.T < 1:
            raise ValueError(f"T must be in (0, 1), got {self.T}")


@dataclass(frozen=True)
class FrameAnnotation:
    frame_id: str
    marked: tuple[MarkedObstacle, ...] = ()
    indifference: tuple[IndifferenceZone, ...] = ()
    corridor: DrivingCorridor = field(default_factory=DrivingCorridor)


@dataclass
class FrameLabels:
    marked: list[Label]
    detected: list[Label]
    marked_partners: list[list[int]]
    detected_partners: list[list[int]]


@dataclass
class FrameResult:
    frame_id: str
    labels: FrameLabels
    corridor_labels: list[Label]
    verdict: StopVerdict

    @property
    def n_tp(self) -> int:
        return self.corridor_labels.count(Label.TP)

    @property
    def n_fp(self) -> int:
        return self.corridor_labels.count(Label.FP)

    @property
    def n_fn(self) -> int:
        return self.corridor_labels.count(Label.FN)


# -- planar predicates (closed sets) --------------------------------------------


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(p, a, b) -> bool:
    return (
        _orient(a, b, p) == 0
        and min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def segments_intersect(a, b, c, d) -> bool:
    o1, o2, o3, o4 = _orient(a, b, c), _orient(a, b, d), _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return True
    return _on_segment(c, a, b) or _on_segment(d, a, b) or _on_segment(a, c, d) or _on_segment(b, c, d)


def point_in_polygon(p, poly) -> bool:
    n = len(poly)
    for i in range(n):
        if _on_segment(p, poly[i], poly[(i + 1) % n]):
            return True
    inside = False
    x, y = p
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def is_simple_polygon(poly) -> bool:
    n = len(poly)
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent edges share exactly one vertex; reject folding back
                a, b = edges[i]
                c, d = edges[j]
                shared = b if j == i + 1 else a
                other_i = a if j == i + 1 else b
                other_j = d if j == i + 1 else c
                if _on_segment(other_j, *edges[i]) and other_j != shared:
                    return False
                if _on_segment(other_i, *edges[j]) and other_i != shared:
                    return False
                continue
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def rects_intersect(a: Rect, b: Rect) -> bool:
    return max(a[0], b[0]) <= min(a[2], b[2]) and max(a[1], b[1]) <= min(a[3], b[3])


def rect_intersects_polygon(rect: Rect, poly) -> bool:
    u0, v0, u1, v1 = rect
    for p in poly:
        if u0 <= p[0] <= u1 and v0 <= p[1] <= v1:
            return True
    corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
    if any(point_in_polygon(c, poly) for c in corners):
        return True
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for k in range(4):
            if segments_intersect(a, b, corners[k], corners[(k + 1) % 4]):
                return True
    return False


# -- matching rule ---------------------------------------------------------------


def depth_condition(z_ref: float, z_exp: float, cfg: MatchConfig = MatchConfig()) -> bool:
    if not (z_ref > 0 and z_exp > 0):
        raise ValueError(f"distances must be positive, got z_ref={z_ref}, z_exp={z_exp}")
    return abs(z_ref - z_exp) / z_ref < cfg.T


def match_frame(annotation: FrameAnnotation, detections: Sequence, cfg: MatchConfig = MatchConfig()) -> FrameLabels:
    """Many-to-many matching; each side is labeled independently.

    ``detections`` need ``rect_px`` and ``z_exp`` attributes.
    """
    M, N = len(annotation.marked), len(detections)
    if M and N:
        zr = np.array([m.z_ref for m in annotation.marked])[:, None]
        ze = np.array([d.z_exp for d in detections], dtype=np.float64)[None, :]
        if np.any(ze <= 0):
            raise ValueError("detected distances must be positive")
        rm = np.array([m.rect_px for m in annotation.marked])
        rd = np.array([d.rect_px for d in detections], dtype=np.float64)
        overlap = (np.maximum(rm[:, None, 0], rd[None, :, 0]) <= np.minimum(rm[:, None, 2], rd[None, :, 2])) & (
            np.maximum(rm[:, None, 1], rd[None, :, 1]) <= np.minimum(rm[:, None, 3], rd[None, :, 3])
        )
        ok = (np.abs(zr - ze) / zr < cfg.T) & overlap
    else:
        ok = np.zeros((M, N), dtype=bool)

    marked_partners = [np.flatnonzero(ok[i]).tolist() for i in range(M)]
    detected_partners = [np.flatnonzero(ok[:, j]).tolist() for j in range(N)]
    marked = [Label.TP if p else Label.FN for p in marked_partners]
    detected = []
    for j, det in enumerate(detections):
        if detected_partners[j]:
            detected.append(Label.TP)
        elif any(rect_intersects_polygon(tuple(det.rect_px), z.polygon_px) for z in annotation.indifference):
            detected.append(Label.ABSORBED)
        else:
            detected.append(Label.FP)
    return FrameLabels(marked, detected, marked_partners, detected_partners)


def in_corridor(x_left: float, x_right: float, z_front: float, corridor: DrivingCorridor) -> bool:
    half = corridor.width_m / 2.0
    return x_left <= half and x_right >= -half and 0 < z_front <= corridor.length_m


def marked_footprint(m: MarkedObstacle, rig: geo.CameraRig) -> tuple[float, float, float]:
    """Lateral span and range of a marked obstacle recovered from its rectangle."""
    xl, _ = geo.unproject_level(rig, m.rect_px[0], m.rect_px[3], m.z_ref)
    xr, _ = geo.unproject_level(rig, m.rect_px[2], m.rect_px[3], m.z_ref)
    return float(xl), float(xr), m.z_ref


def classify_stop(labels: Iterable[Label]) -> StopVerdict:
    c = Counter(labels)
    if c[Label.TP]:
        return StopVerdict.TRUE_POSITIVE
    if c[Label.FN]:
        return StopVerdict.FALSE_NEGATIVE
    if c[Label.FP]:
        return StopVerdict.FALSE_POSITIVE
    return StopVerdict.TRUE_NEGATIVE


def evaluate_frame(
    annotation: FrameAnnotation, detections: Sequence, rig: geo.CameraRig, cfg: MatchConfig = MatchConfig()
) -> FrameResult:
    labels = match_frame(annotation, detections, cfg)
    corridor = annotation.corridor
    in_c = []
    for m, lab in zip(annotation.marked, labels.marked):
        if in_corridor(*marked_footprint(m, rig), corridor):
            in_c.append(lab)
    for d, lab in zip(detections, labels.detected):
        if lab is Label.FP and in_corridor(d.x_left, d.x_right, d.z_exp, corridor):
            in_c.append(lab)
    return FrameResult(annotation.frame_id, labels, in_c, classify_stop(in_c))


# -- aggregation -------------------------------------------------------------------


@dataclass(frozen=True)
class Summary:
    """Stop rates over a dataset; a rate is ``None`` when its denominator is zero."""

    tpr: float | None
    fpr: float | None
    counts: dict

    @property
    def n_frames(self) -> int:
        return sum(self.counts.values())


def rates_from_counts(counts: dict) -> Summary:
    tp = counts.get(StopVerdict.TRUE_POSITIVE, 0)
    fn = counts.get(StopVerdict.FALSE_NEGATIVE, 0)
    fp = counts.get(StopVerdict.FALSE_POSITIVE, 0)
    tn = counts.get(StopVerdict.TRUE_NEGATIVE, 0)
    tpr = tp / (tp + fn) if tp + fn else None
    fpr = fp / (fp + tn) if fp + tn else None
    return Summary(tpr, fpr, {v: counts.get(v, 0) for v in StopVerdict})


def aggregate(results: Sequence[FrameResult | StopVerdict]) -> Summary:
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    verdicts = [r if isinstance(r, StopVerdict) else r.verdict for r in results]
    return rates_from_counts(Counter(verdicts))


# -- file formats --------------------------------------------------------------------

UNDEFINED = "undefined"


def fmt_rate(x: float | None) -> str:
    return UNDEFINED if x is None else repr(float(x))


def parse_rate(s: str) -> float | None:
    return None if s == UNDEFINED else float(s)


@dataclass(frozen=True)
class AnnotationSet:
    frames: tuple[FrameAnnotation, ...]
    corridor: DrivingCorridor
    match: MatchConfig

    def by_id(self) -> dict[str, FrameAnnotation]:
        return {f.frame_id: f for f in self.frames}


def annotations_to_dict(ann: AnnotationSet) -> dict:
    return {
        "corridor": {"width_m": ann.corridor.width_m, "length_m": ann.corridor.length_m},
        "match": {"T": ann.match.T},
        "frames": [
            {
                "frame_id": f.frame_id,
                "marked": [{"rect_px": list(m.rect_px), "z_ref_m": m.z_ref} for m in f.marked],
                "indifference": [{"polygon_px": [list(p) for p in z.polygon_px]} for z in f.indifference],
            }
            for f in ann.frames
        ],
    }


def save_annotations(path, ann: AnnotationSet) -> None:
    Path(path).write_text(json.dumps(annotations_to_dict(ann), indent=1) + "\n")


def _field(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise AnnotationError(f"{where}: missing field '{key}'")
    return d[key]


def annotations_from_dict(doc: dict) -> AnnotationSet:
    try:
        c = doc.get("corridor", {}) if isinstance(doc, dict) else {}
        corridor = DrivingCorridor(**c)
    except (TypeError, ValueError) as e:
        raise AnnotationError(f"corridor: {e}") from None
    try:
        match = MatchConfig(**(doc.get("match", {}) or {}))
    except (TypeError, ValueError) as e:
        raise AnnotationError(f"match: {e}") from None
    frames = []
    seen = set()
    for i, fr in enumerate(_field(doc, "frames", "annotations")):
        where = f"frames[{i}]"
        fid = str(_field(fr, "frame_id", where))
        if fid in seen:
            raise AnnotationError(f"{where}.frame_id: duplicate id {fid!r}")
        seen.add(fid)
        marked = []
        for k, m in enumerate(fr.get("marked", [])):
            w = f"{where}.marked[{k}]"
            try:
                marked.append(MarkedObstacle(tuple(_field(m, "rect_px", w)), float(_field(m, "z_ref_m", w))))
            except (TypeError, ValueError) as e:
                if isinstance(e, AnnotationError):
                    raise
                raise AnnotationError(f"{w}: {e}") from None
        zones = []
        for k, z in enumerate(fr.get("indifference", [])):
            w = f"{where}.indifference[{k}]"
            try:
                zones.append(IndifferenceZone(tuple(tuple(p) for p in _field(z, "polygon_px", w))))
            except (TypeError, ValueError) as e:
                if isinstance(e, AnnotationError):
                    raise
                raise AnnotationError(f"{w}.polygon_px: {e}") from None
        frames.append(FrameAnnotation(fid, tuple(marked), tuple(zones), corridor))
    return AnnotationSet(tuple(frames), corridor, match)


def load_annotations(path) -> AnnotationSet:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise AnnotationError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    try:
        return annotations_from_dict(doc)
    except AnnotationError as e:
        raise AnnotationError(f"{path}: {e}") from None


REPORT_COLUMNS = ["frame_id", "verdict", "n_tp", "n_fp", "n_fn", "tpr", "fpr"]
SUMMARY_ID = "__summary__"


def report_csv(results: Sequence[FrameResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in results:
        w.writerow([r.frame_id, r.verdict.value, r.n_tp, r.n_fp, r.n_fn, "", ""])
    s = aggregate(results)
    w.writerow(
        [
            SUMMARY_ID,
            "",
            sum(r.n_tp for r in results),
            sum(r.n_fp for r in results),
            sum(r.n_fn for r in results),
            fmt_rate(s.tpr),
            fmt_rate(s.fpr),
        ]
    )
    return buf.getvalue()


def read_report_csv(text: str) -> tuple[list[dict], Summary]:
    rows = list(csv.DictReader(io.StringIO(text)))
    frames, summary = [], None
    counts: Counter = Counter()
    for row in rows:
        if row["frame_id"] == SUMMARY_ID:
            summary = (parse_rate(row["tpr"]), parse_rate(row["fpr"]))
        else:
            v = StopVerdict(row["verdict"])
            counts[v] += 1
            frames.append(
                {
                    "frame_id": row["frame_id"],
                    "verdict": v,
                    "n_tp": int(row["n_tp"]),
                    "n_fp": int(row["n_fp"]),
                    "n_fn": int(row["n_fn"]),
                }
            )
    if summary is None:
        raise ValueError("report has no summary row")
    return frames, Summary(summary[0], summary[1], {v: counts.get(v, 0) for v in StopVerdict})
