"""On-disk datasets: calibration, per-frame images/depth, annotations, manifest.

Layout written by :func:`generate_dataset`::

    root/manifest.json
    root/calib.json
    root/annotations.json
    root/frames/<id>_left.pgm, <id>_right.pgm, <id>_depth.pfm, <id>_disp.pfm
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import imageio, synth
from .evaluator import AnnotationSet, DrivingCorridor, MatchConfig, load_annotations, save_annotations
from .geometry import CameraRig


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class FrameEntry:
    frame_id: str
    left: str | None = None
    right: str | None = None
    depth: str | None = None
    disparity: str | None = None

    def paths(self) -> list[str]:
        return [p for p in (self.left, self.right, self.depth, self.disparity) if p]


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    calibration: str
    annotations: str
    frames: tuple[FrameEntry, ...]
    provenance: dict = field(default_factory=dict)

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def to_dict(self) -> dict:
        return {
            "calibration": self.calibration,
            "annotations": self.annotations,
            "provenance": self.provenance,
            "frames": [{k: v for k, v in vars(f).items() if v is not None} for f in self.frames],
        }

    def save(self, path=None) -> Path:
        path = Path(path) if path else self.root / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        return path


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise DatasetError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    try:
        frames = tuple(FrameEntry(**f) for f in doc["frames"])
        m = DatasetManifest(
            root=path.parent,
            calibration=doc["calibration"],
            annotations=doc["annotations"],
            frames=frames,
            provenance=doc.get("provenance", {}),
        )
    except (KeyError, TypeError) as e:
        raise DatasetError(f"{path}: malformed manifest ({e})") from None
    ids = [f.frame_id for f in frames]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise DatasetError(f"duplicate frame ids: {', '.join(dup)}")
    missing = [rel for rel in (m.calibration, m.annotations) if not m.path(rel).exists()]
    missing_frames = [f.frame_id for f in frames if any(not m.path(p).exists() for p in f.paths())]
    if missing or missing_frames:
        msg = []
        if missing:
            msg.append("missing files: " + ", ".join(missing))
        if missing_frames:
            msg.append("frames with missing files: " + ", ".join(missing_frames))
        raise DatasetError("; ".join(msg))
    return m


@dataclass
class Dataset:
    """A loaded manifest with calibration and annotations; frame data is read on demand."""

    manifest: DatasetManifest
    rig: CameraRig
    annotations: AnnotationSet

    @classmethod
    def open(cls, path) -> "Dataset":
        m = load_manifest(path)
        rig = CameraRig.load(m.path(m.calibration))
        ann = load_annotations(m.path(m.annotations))
        by_id = ann.by_id()
        absent = [f.frame_id for f in m.frames if f.frame_id not in by_id]
        if absent:
            raise DatasetError("frames without annotations: " + ", ".join(absent))
        return cls(m, rig, ann)

    @property
    def frame_ids(self) -> list[str]:
        return [f.frame_id for f in self.manifest.frames]

    def __len__(self) -> int:
        return len(self.manifest.frames)

    @cached_property
    def _ann_by_id(self) -> dict:
        return self.annotations.by_id()

    def annotation(self, i: int):
        return self._ann_by_id[self.manifest.frames[i].frame_id]

    def images(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        f = self.manifest.frames[i]
        if not (f.left and f.right):
            raise DatasetError(f"frame {f.frame_id} has no stereo images")
        return imageio.read_pgm(self.manifest.path(f.left)), imageio.read_pgm(self.manifest.path(f.right))

    def depth(self, i: int) -> np.ndarray:
        f = self.manifest.frames[i]
        if not f.depth:
            raise DatasetError(f"frame {f.frame_id} has no depth map")
        return imageio.read_depth(self.manifest.path(f.depth))


# -- scene suites and generation ------------------------------------------------------


@dataclass(frozen=True)
class Suite:
    scenes: tuple[tuple[synth.SceneSpec, synth.NoiseSpec], ...]
    rig: CameraRig | None = None
    corridor: DrivingCorridor = field(default_factory=DrivingCorridor)
    match: MatchConfig = field(default_factory=MatchConfig)


def suite_to_doc(suite: Suite) -> dict | list:
    items = [{"scene": s.to_dict(), "noise": n.to_dict()} for s, n in suite.scenes]
    if suite.rig is None and suite.corridor == DrivingCorridor() and suite.match == MatchConfig():
        return items
    doc = {"scenes": items, "corridor": vars(suite.corridor), "match": vars(suite.match)}
    if suite.rig is not None:
        doc["calibration"] = suite.rig.to_dict()
    return doc


def suite_from_doc(doc) -> Suite:
    """Accept a bare list of ``{scene, noise}`` items or an object with a ``scenes`` list."""
    rig, corridor, match = None, DrivingCorridor(), MatchConfig()
    if isinstance(doc, dict):
        try:
            if "calibration" in doc:
                rig = CameraRig.from_dict(doc["calibration"])
            corridor = DrivingCorridor(**doc.get("corridor", {}))
            match = MatchConfig(**doc.get("match", {}))
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"suite header: {e}") from None
        items = doc.get("scenes")
        if not isinstance(items, list):
            raise DatasetError("suite: field 'scenes' must be a list")
    elif isinstance(doc, list):
        items = doc
    else:
        raise DatasetError("suite must be a JSON list or an object with 'scenes'")
    scenes = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise DatasetError(f"scenes[{i}]: expected an object")
        try:
            scene = synth.SceneSpec.from_dict(item.get("scene", {}))
        except (TypeError, ValueError) as e:
            raise DatasetError(f"scenes[{i}].scene: {e}") from None
        try:
            noise = synth.NoiseSpec.from_dict(item.get("noise", {}))
        except (TypeError, ValueError) as e:
            raise DatasetError(f"scenes[{i}].noise: {e}") from None
        scenes.append((scene, noise))
    return Suite(tuple(scenes), rig, corridor, match)


def load_suite(path) -> Suite:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return suite_from_doc(doc)


def _combine_seed(base: int, s: int) -> int:
    return (int(s) + int(base) * 1_000_003) % (2**63)


def generate_dataset(suite: Suite, out_dir, rig: CameraRig | None = None, seed: int = 0) -> DatasetManifest:
    rig = rig or suite.rig or CameraRig.reference_rig()
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    rig.save(out / "calib.json")
    entries, anns = [], []
    for i, (scene, noise) in enumerate(suite.scenes):
        fid = f"frame_{i:04d}"
        scene = synth.SceneSpec(scene.boxes, scene.reflective_floor, _combine_seed(seed, scene.texture_seed), scene.low_texture)
        # reflections need a reflective floor
        refl = noise.reflection_prob if scene.reflective_floor else 0.0
        noise = synth.NoiseSpec(noise.dropout_prob, noise.depth_sigma_m, refl, _combine_seed(seed, noise.seed))
        pair = synth.render_stereo_pair(scene, rig)
        depth = synth.corrupt(synth.render_depth(scene, rig), noise, rig)
        e = FrameEntry(
            fid,
            left=f"frames/{fid}_left.pgm",
            right=f"frames/{fid}_right.pgm",
            depth=f"frames/{fid}_depth.pfm",
            disparity=f"frames/{fid}_disp.pfm",
        )
        imageio.write_pgm(out / e.left, pair.left)
        imageio.write_pgm(out / e.right, pair.right)
        imageio.write_depth(out / e.depth, depth)
        imageio.write_disparity(out / e.disparity, pair.disparity)
        entries.append(e)
        anns.append(synth.annotate(scene, rig, suite.corridor, frame_id=fid))
    save_annotations(out / "annotations.json", AnnotationSet(tuple(anns), suite.corridor, suite.match))
    manifest = DatasetManifest(
        root=out,
        calibration="calib.json",
        annotations="annotations.json",
        frames=tuple(entries),
        provenance={"generator": "stopeval.synth", "seed": int(seed), "n_scenes": len(suite.scenes)},
    )
    manifest.save()
    return manifest
