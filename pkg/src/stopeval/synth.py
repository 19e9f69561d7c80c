"""Synthetic road scenes: ray-cast depth, textured stereo pairs, sensor noise and ground truth.

Scenes are a ground plane at y = 0 plus axis-aligned boxes standing on it.
Every random draw goes through numpy's PCG64 seeded explicitly, and the
surface texture is a hash of lattice coordinates, so outputs are
bit-reproducible for a given seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import geometry as geo
from .evaluator import DrivingCorridor, FrameAnnotation, MarkedObstacle

SKY, GROUND = -1, 0


@dataclass(frozen=True)
class Box:
    """Axis-aligned box on the ground; ``x``/``z`` locate the footprint center."""

    x: float
    z: float
    width: float
    depth: float
    height: float

    def __post_init__(self):
        if min(self.width, self.depth, self.height) <= 0:
            raise ValueError(f"box dimensions must be positive: {self}")
        if self.front_z <= 0:
            raise ValueError(f"box must lie in front of the camera: {self}")

    @classmethod
    def at_front(cls, x, front_z, width, height, depth=0.5) -> "Box":
        return cls(x=x, z=front_z + depth / 2.0, width=width, depth=depth, height=height)

    @property
    def front_z(self) -> float:
        return self.z - self.depth / 2.0

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.x - self.width / 2.0, 0.0, self.front_z])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.x + self.width / 2.0, self.height, self.z + self.depth / 2.0])


@dataclass(frozen=True)
class SceneSpec:
    boxes: tuple[Box, ...] = ()
    reflective_floor: bool = False
    texture_seed: int = 0
    low_texture: bool = False

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def to_dict(self) -> dict:
        return {
            "boxes": [asdict(b) for b in self.boxes],
            "reflective_floor": self.reflective_floor,
            "texture_seed": self.texture_seed,
            "low_texture": self.low_texture,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        boxes = []
        for i, b in enumerate(d.get("boxes", [])):
            try:
                boxes.append(Box(**b))
            except TypeError as e:
                raise ValueError(f"boxes[{i}]: {e}") from None
        return cls(
            boxes=tuple(boxes),
            reflective_floor=bool(d.get("reflective_floor", False)),
            texture_seed=int(d.get("texture_seed", 0)),
            low_texture=bool(d.get("low_texture", False)),
        )


@dataclass(frozen=True)
class NoiseSpec:
    dropout_prob: float = 0.0
    depth_sigma_m: float = 0.0
    reflection_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("dropout_prob", "reflection_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.depth_sigma_m < 0:
            raise ValueError("depth_sigma_m must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(**d)


# -- ray casting -------------------------------------------------------------


class Hits(NamedTuple):
    t: np.ndarray  # camera-frame depth of the hit, NaN for sky
    surface: np.ndarray  # SKY, GROUND, or 1 + box index
    axis: np.ndarray  # box face normal axis (0, 1, 2); 1 for the ground
    points: np.ndarray  # vehicle-frame hit points, NaN for sky


def _slab(origin, dirs, lo, hi):
    """Entry/exit ray parameters of a box and the axis of the entry face."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo - origin) * inv
        t2 = (hi - origin) * inv
    tmin = np.fmin(t1, t2)
    tmax = np.fmax(t1, t2)
    # rays parallel to a slab: inside -> unbounded, outside -> miss
    par = dirs == 0
    inside = (origin >= lo) & (origin <= hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    axis = np.argmax(tmin, axis=-1)
    return tmin.max(axis=-1), tmax.min(axis=-1), axis


def cast(scene: SceneSpec, origin: np.ndarray, dirs: np.ndarray) -> Hits:
    """Nearest hit along ``origin + t * dirs`` for t > 0."""
    shape = dirs.shape[:-1]
    t = np.full(shape, np.inf)
    surface = np.full(shape, SKY, dtype=np.int32)
    axis = np.ones(shape, dtype=np.int8)

    dy = dirs[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        tg = np.where(dy < 0, -origin[1] / dy, np.inf)
    hit = tg < t
    t[hit] = tg[hit]
    surface[hit] = GROUND

    for k, box in enumerate(scene.boxes):
        tn, tf, ax = _slab(origin, dirs, box.lo, box.hi)
        hit = (tn <= tf) & (tn > 0) & (tn < t)
        t[hit] = tn[hit]
        surface[hit] = k + 1
        axis[hit] = ax[hit]

    sky = ~np.isfinite(t)
    t[sky] = np.nan
    points = origin + dirs * t[..., None]
    return Hits(t, surface, axis, points)


def _cast_camera(scene: SceneSpec, rig: geo.CameraRig, right: bool = False) -> Hits:
    u, v = rig.pixel_grid()
    origin = rig.right_center if right else rig.center
    return cast(scene, origin, rig.rays(u, v))


def render_depth(scene: SceneSpec, rig: geo.CameraRig) -> np.ndarray:
    """Camera-frame depth of the nearest surface per pixel, NaN where the ray sees sky."""
    return _cast_camera(scene, rig).t


# -- procedural texture --------------------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def _lattice(i: np.ndarray, j: np.ndarray, key: np.ndarray) -> np.ndarray:
    h = _mix(i.astype(np.int64).astype(np.uint64) ^ (key * np.uint64(0x9E3779B97F4A7C15)))
    h = _mix(h ^ j.astype(np.int64).astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(a: np.ndarray, b: np.ndarray, key: np.ndarray, scale: float) -> np.ndarray:
    """Smoothly interpolated lattice noise in [0, 1) with lattice spacing ``scale``."""
    a = a / scale
    b = b / scale
    i0 = np.floor(a)
    j0 = np.floor(b)
    fa = a - i0
    fb = b - j0
    fa = fa * fa * (3 - 2 * fa)
    fb = fb * fb * (3 - 2 * fb)
    n00 = _lattice(i0, j0, key)
    n10 = _lattice(i0 + 1, j0, key)
    n01 = _lattice(i0, j0 + 1, key)
    n11 = _lattice(i0 + 1, j0 + 1, key)
    return (n00 * (1 - fa) + n10 * fa) * (1 - fb) + (n01 * (1 - fa) + n11 * fa) * fb


def texture_scale(rig: geo.CameraRig, low_texture: bool = False) -> float:
    """Lattice spacing giving about four pixels per texel at 5 m range."""
    s = 4.0 * 5.0 / rig.focal_px
    return s * 10.0 if low_texture else s


def _footprint(hits: Hits, dirs: np.ndarray, focal_px: float) -> np.ndarray:
    """Approximate metric size of one pixel on the hit surface."""
    norm = np.linalg.norm(dirs, axis=-1)
    axis = hits.axis.astype(np.int64)
    cos = np.abs(np.take_along_axis(dirs, axis[..., None], axis=-1)[..., 0]) / norm
    # geometric mean of the along- and across-slope extents
    return np.nan_to_num(hits.t) * norm / focal_px / np.sqrt(np.maximum(cos, 0.05))


_OCTAVES = ((1.0, 0.5), (0.5, 0.3), (0.25, 0.2))


def shade(scene: SceneSpec, hits: Hits, scale: float, footprint: np.ndarray | None = None) -> np.ndarray:
    """Intensity image for a set of hits; texture is anchored on the surfaces.

    Octaves whose texels shrink below about two pixel footprints fade to their
    mean, standing in for the area integration of a real pixel.
    """
    p = np.nan_to_num(hits.points)
    surf = hits.surface
    ax = hits.axis
    # surface-local 2D coordinates: ground (x, z); box faces drop their normal axis
    a = np.where(ax == 0, p[..., 2], p[..., 0])
    b = np.where(ax == 2, p[..., 1], np.where(ax == 1, p[..., 2], p[..., 1]))
    key = (
        np.uint64(scene.texture_seed & 0xFFFFFFFF) * np.uint64(1 << 32)
        + (surf.astype(np.int64) + 1).astype(np.uint64) * np.uint64(4)
        + ax.astype(np.uint64)
    )
    n = np.full(a.shape, 0.5)
    for k, (rel, weight) in enumerate(_OCTAVES):
        s = scale * rel
        octave = value_noise(a, b, key ^ np.uint64(0xABCDEF * k), s) - 0.5
        if footprint is not None:
            octave = octave * np.clip(s / np.maximum(footprint, 1e-12) - 1.0, 0.0, 1.0)
        n = n + weight * 2.0 * octave
    img = 128.0 + 110.0 * (n - 0.5) * 2.0
    img = np.where(surf == SKY, 200.0, img)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


class StereoRender(NamedTuple):
    left: np.ndarray
    right: np.ndarray
    disparity: np.ndarray  # true left disparity, NaN where no surface
    nonoccluded: np.ndarray  # left pixels whose surface point is visible in the right view


def _visible_from(scene: SceneSpec, rig: geo.CameraRig, hits: Hits, right: bool) -> np.ndarray:
    c = rig.right_center if right else rig.center
    valid = np.isfinite(hits.t)
    u, v, z = geo.project_points(rig, np.where(valid[..., None], hits.points, c + [0, 0, 1]), right=right)
    vis = valid & (z > 0) & (u >= -0.5) & (u < rig.width - 0.5) & (v >= -0.5) & (v < rig.height - 0.5)
    seg = hits.points - c
    for box in scene.boxes:
        tn, tf, _ = _slab(c, seg, box.lo, box.hi)
        blocked = (tn <= tf) & (tn > 1e-9) & (tn < 1.0 - 1e-7)
        vis &= ~blocked
    return vis


def render_stereo_pair(scene: SceneSpec, rig: geo.CameraRig) -> StereoRender:
    scale = texture_scale(rig, scene.low_texture)
    dirs = rig.rays(*rig.pixel_grid())
    lh = cast(scene, rig.center, dirs)
    rh = cast(scene, rig.right_center, dirs)
    left = shade(scene, lh, scale, _footprint(lh, dirs, rig.focal_px))
    right = shade(scene, rh, scale, _footprint(rh, dirs, rig.focal_px))
    with np.errstate(divide="ignore", invalid="ignore"):
        disp = rig.focal_px * rig.baseline_m / lh.t
    nonocc = _visible_from(scene, rig, lh, right=True)
    return StereoRender(left, right, disp, nonocc)


# -- noise ---------------------------------------------------------------------


def ground_mask(depth: np.ndarray, rig: geo.CameraRig, tol_m: float = 1e-3) -> np.ndarray:
    gd = rig.ground_depth(*rig.pixel_grid())
    return np.isfinite(depth) & np.isfinite(gd) & (np.abs(depth - gd) <= tol_m * np.maximum(gd, 1.0))


def corrupt(depth: np.ndarray, noise: NoiseSpec, rig: geo.CameraRig) -> np.ndarray:
    """Apply dropout, Gaussian depth noise and floor-reflection ghosts.

    A reflected ground pixel sees a virtual point below the floor with inverse
    depth ``w / z_g`` (``w`` uniform in [0, 1)); the matcher locks onto its
    mirror about the floor, so the pixel reports ``z_g / (2 - w)``: a point on
    the same ray between the camera and the floor, above the ground.
    """
    depth = np.asarray(depth, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(noise.seed))
    shape = depth.shape
    # draw every stream at full size so pixel i always consumes the same variates
    u_drop = rng.random(shape)
    u_refl = rng.random(shape)
    w_mirror = rng.random(shape)
    gauss = rng.standard_normal(shape)

    valid = np.isfinite(depth) & (depth > 0)
    out = depth.copy()
    if noise.reflection_prob > 0:
        refl = ground_mask(depth, rig) & (u_refl < noise.reflection_prob)
        out = np.where(refl, depth / (2.0 - w_mirror), out)
    if noise.depth_sigma_m > 0:
        out = out + noise.depth_sigma_m * gauss
    keep = valid & (u_drop >= noise.dropout_prob) & (out > 0)
    return np.where(keep, out, np.nan)


# -- ground truth --------------------------------------------------------------


def visible_boxes(scene: SceneSpec, rig: geo.CameraRig, min_pixels: int = 1) -> list[int]:
    surf = _cast_camera(scene, rig).surface
    counts = np.bincount(surf[surf > 0].ravel(), minlength=len(scene.boxes) + 1)
    return [k for k in range(len(scene.boxes)) if counts[k + 1] >= min_pixels]


def annotate(
    scene: SceneSpec, rig: geo.CameraRig, corridor: DrivingCorridor, frame_id: str = ""
) -> FrameAnnotation:
    marked = []
    for k in visible_boxes(scene, rig):
        b = scene.boxes[k]
        x0, x1 = b.x - b.width / 2.0, b.x + b.width / 2.0
        u0, v_top = geo.project_level(rig, x0, b.height, b.front_z)
        u1, v_bot = geo.project_level(rig, x1, 0.0, b.front_z)
        marked.append(MarkedObstacle((float(u0), float(v_top), float(u1), float(v_bot)), float(b.front_z)))
    return FrameAnnotation(frame_id=frame_id, marked=tuple(marked), indifference=(), corridor=corridor)


# -- scene suites ----------------------------------------------------------------


@dataclass(frozen=True)
class SuiteConfig:
    """Random scene suite: boxes 0.4-2 m wide with fronts at 2-7 m."""

    n_frames: int = 200
    seed: int = 0
    stop_fraction: float = 0.6
    width_range: tuple[float, float] = (0.4, 2.0)
    front_range: tuple[float, float] = (2.0, 7.0)
    height_range: tuple[float, float] = (0.8, 2.0)
    depth_range: tuple[float, float] = (0.3, 1.0)
    corridor_half_width: float = 1.25
    distractor_gap_m: float = 0.75
    reflective_fraction: float = 0.0
    low_texture_fraction: float = 0.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)


def _random_box(rng, cfg: SuiteConfig, in_corridor: bool) -> Box:
    w = rng.uniform(*cfg.width_range)
    front = rng.uniform(*cfg.front_range)
    h = rng.uniform(*cfg.height_range)
    d = rng.uniform(*cfg.depth_range)
    if in_corridor:
        x = rng.uniform(-1.0, 1.0)
    else:
        inner = cfg.corridor_half_width + cfg.distractor_gap_m + w / 2.0
        x = rng.choice([-1.0, 1.0]) * rng.uniform(inner, inner + 1.5)
    return Box.at_front(float(x), float(front), float(w), float(h), float(d))


def random_suite(cfg: SuiteConfig) -> list[tuple[SceneSpec, NoiseSpec]]:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    suite = []
    for i in range(cfg.n_frames):
        stop = rng.random() < cfg.stop_fraction
        n_distract = int(rng.integers(0, 2))
        boxes = [_random_box(rng, cfg, True)] if stop else []
        boxes += [_random_box(rng, cfg, False) for _ in range(n_distract)]
        scene = SceneSpec(
            boxes=tuple(boxes),
            reflective_floor=bool(rng.random() < cfg.reflective_fraction),
            texture_seed=int(rng.integers(0, 2**31)),
            low_texture=bool(rng.random() < cfg.low_texture_fraction),
        )
        noise = NoiseSpec(
            dropout_prob=cfg.noise.dropout_prob,
            depth_sigma_m=cfg.noise.depth_sigma_m,
            reflection_prob=cfg.noise.reflection_prob,
            seed=int(rng.integers(0, 2**31)),
        )
        suite.append((scene, noise))
    return suite
