"""Pinhole stereo rig mounted on a vehicle.

Frames
------
camera   x right, y down, z along the optical axis (depth maps store this z)
vehicle  x right, y up (height above the ground plane), z forward; origin on
         the ground directly below the left optical center
level    a virtual camera at the same position with zero pitch and the same
         intrinsics; annotation rectangles live in its image

Pixel coordinates are continuous, with integer values at pixel centers, so the
array element ``img[v, u]`` sits at ``(u, v)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


class BehindCameraError(ValueError):
    """Point lies on or behind the camera plane."""


class UnrepresentablePixelError(ValueError):
    """Pixel maps to or beyond the horizon of the level virtual camera."""


class VehiclePoint(NamedTuple):
    x: float
    y: float
    z: float


def focal_from_fov(image_width: float, horizontal_fov_deg: float) -> float:
    if not 0.0 < horizontal_fov_deg < 180.0:
        raise ValueError(f"horizontal fov must be in (0, 180) degrees, got {horizontal_fov_deg}")
    if image_width <= 0:
        raise ValueError(f"image width must be positive, got {image_width}")
    return (image_width / 2.0) / math.tan(math.radians(horizontal_fov_deg) / 2.0)


@dataclass(frozen=True)
class CameraRig:
    focal_px: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]  # (width, height)
    baseline_m: float
    mount_height_m: float
    pitch_deg: float

    def __post_init__(self):
        object.__setattr__(self, "principal_point", tuple(float(c) for c in self.principal_point))
        object.__setattr__(self, "image_size", tuple(int(c) for c in self.image_size))
        w, h = self.image_size
        u0, v0 = self.principal_point
        if not self.focal_px > 0:
            raise ValueError("focal_px must be positive")
        # zero baseline is allowed only as a degenerate rig for rendering checks
        if not self.baseline_m >= 0:
            raise ValueError("baseline_m must be non-negative")
        if not self.mount_height_m > 0:
            raise ValueError("mount_height_m must be positive")
        if not 0.0 <= self.pitch_deg < 90.0:
            raise ValueError("pitch_deg must be in [0, 90)")
        if w <= 0 or h <= 0:
            raise ValueError("image_size must be positive")
        if not (0 < u0 < w and 0 < v0 < h):
            raise ValueError("principal point must lie strictly inside the image")

    # -- construction -----------------------------------------------------

    @classmethod
    def reference_rig(cls, width: int = 1280, height: int = 1024) -> "CameraRig":
        """Vehicle rig of the road experiments: 80 deg view, 0.75 m base, 2.2 m up, 20 deg down.

        ``width``/``height`` rescale the sensor while keeping the field of view.
        """
        return cls(
            focal_px=focal_from_fov(width, 80.0),
            principal_point=(width / 2.0, height / 2.0),
            image_size=(width, height),
            baseline_m=0.75,
            mount_height_m=2.2,
            pitch_deg=20.0,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["principal_point"] = list(self.principal_point)
        d["image_size"] = list(self.image_size)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CameraRig":
        keys = ("focal_px", "principal_point", "image_size", "baseline_m", "mount_height_m", "pitch_deg")
        missing = [k for k in keys if k not in d]
        if missing:
            raise KeyError(f"calibration is missing field(s): {', '.join(missing)}")
        return cls(**{k: d[k] for k in keys})

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "CameraRig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    # -- derived quantities ----------------------------------------------

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    @property
    def K(self) -> np.ndarray:
        u0, v0 = self.principal_point
        f = self.focal_px
        return np.array([[f, 0.0, u0], [0.0, f, v0], [0.0, 0.0, 1.0]])

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-vehicle rotation; columns are the camera axes in vehicle coordinates."""
        t = math.radians(self.pitch_deg)
        c, s = math.cos(t), math.sin(t)
        return np.array([[1.0, 0.0, 0.0], [0.0, -c, -s], [0.0, -s, c]])

    @property
    def center(self) -> np.ndarray:
        return np.array([0.0, self.mount_height_m, 0.0])

    @property
    def right_center(self) -> np.ndarray:
        return np.array([self.baseline_m, self.mount_height_m, 0.0])

    def in_bounds(self, u, v) -> np.ndarray:
        w, h = self.image_size
        return (u >= 0) & (u <= w) & (v >= 0) & (v <= h)

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        w, h = self.image_size
        return np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))

    def rays(self, u, v) -> np.ndarray:
        """Vehicle-frame ray directions (camera z component = 1) for pixel arrays."""
        u0, v0 = self.principal_point
        xc = (np.asarray(u, dtype=np.float64) - u0) / self.focal_px
        yc = (np.asarray(v, dtype=np.float64) - v0) / self.focal_px
        cam = np.stack([xc, yc, np.ones_like(xc)], axis=-1)
        return cam @ self.rotation.T

    def ground_depth(self, u, v) -> np.ndarray:
        """Camera-frame depth where each pixel ray meets the ground, NaN if it never does."""
        d = self.rays(u, v)
        dy = d[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(dy < 0, -self.mount_height_m / dy, np.nan)
        return t


# -- point transforms ------------------------------------------------------


def backproject(rig: CameraRig, pixel, depth_m: float) -> VehiclePoint:
    u, v = float(pixel[0]), float(pixel[1])
    if not depth_m > 0:
        raise ValueError(f"depth must be positive, got {depth_m}")
    if not rig.in_bounds(u, v):
        raise ValueError(f"pixel {(u, v)} outside image {rig.image_size}")
    p = rig.rays(u, v) * depth_m + rig.center
    return VehiclePoint(float(p[0]), float(p[1]), float(p[2]))


def backproject_map(rig: CameraRig, depth: np.ndarray) -> np.ndarray:
    """Vehicle-frame points (N, 3) for every finite positive pixel of a depth image, row-major."""
    if depth.shape != (rig.height, rig.width):
        raise ValueError(f"depth map shape {depth.shape} does not match rig {rig.image_size}")
    vs, us = np.nonzero(np.isfinite(depth) & (depth > 0))
    z = depth[vs, us].astype(np.float64)
    return rig.rays(us, vs) * z[:, None] + rig.center


def to_camera(rig: CameraRig, points: np.ndarray, right: bool = False) -> np.ndarray:
    c = rig.right_center if right else rig.center
    return (np.asarray(points, dtype=np.float64) - c) @ rig.rotation


def project(rig: CameraRig, point) -> tuple[float, float, float]:
    """Pixel ``(u, v)`` and camera depth of a vehicle-frame point. Pixels may fall outside the image."""
    pc = to_camera(rig, np.asarray(point, dtype=np.float64))
    if not pc[2] > 1e-12:
        raise BehindCameraError(f"point {tuple(point)} is at or behind the camera plane")
    u0, v0 = rig.principal_point
    return (u0 + rig.focal_px * pc[0] / pc[2], v0 + rig.focal_px * pc[1] / pc[2], float(pc[2]))


def project_points(rig: CameraRig, points: np.ndarray, right: bool = False):
    """Vectorized projection; returns ``u, v, depth`` with NaN pixels where depth <= 0."""
    pc = to_camera(rig, points, right=right)
    z = pc[..., 2]
    u0, v0 = rig.principal_point
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = z > 1e-12
        u = np.where(ok, u0 + rig.focal_px * pc[..., 0] / z, np.nan)
        v = np.where(ok, v0 + rig.focal_px * pc[..., 1] / z, np.nan)
    return u, v, z


# -- level rectification ---------------------------------------------------


def level_homography(rig: CameraRig) -> np.ndarray:
    """Homography taking tilted-camera pixels to level-camera pixels."""
    to_level = np.diag([1.0, -1.0, 1.0]) @ rig.rotation
    return rig.K @ to_level @ np.linalg.inv(rig.K)


def _apply_h(H: np.ndarray, u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = H[2, 0] * u + H[2, 1] * v + H[2, 2]
    if np.any(w <= 1e-12):
        raise UnrepresentablePixelError("pixel maps to or behind the horizon of the target camera")
    return (H[0, 0] * u + H[0, 1] * v + H[0, 2]) / w, (H[1, 0] * u + H[1, 1] * v + H[1, 2]) / w


def rectify_to_level(rig: CameraRig, pixel):
    u, v = _apply_h(level_homography(rig), pixel[0], pixel[1])
    return (float(u), float(v)) if np.ndim(u) == 0 else (u, v)


def unrectify_from_level(rig: CameraRig, pixel):
    u, v = _apply_h(np.linalg.inv(level_homography(rig)), pixel[0], pixel[1])
    return (float(u), float(v)) if np.ndim(u) == 0 else (u, v)


def project_level(rig: CameraRig, x, y, z):
    """Level-camera pixel of vehicle points; level-camera depth equals vehicle z."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise BehindCameraError("level projection needs z > 0")
    u0, v0 = rig.principal_point
    return u0 + rig.focal_px * np.asarray(x) / z, v0 + rig.focal_px * (rig.mount_height_m - np.asarray(y)) / z


def unproject_level(rig: CameraRig, u, v, z):
    """Inverse of :func:`project_level` at a known forward range ``z``."""
    u0, v0 = rig.principal_point
    x = (np.asarray(u, dtype=np.float64) - u0) * z / rig.focal_px
    y = rig.mount_height_m - (np.asarray(v, dtype=np.float64) - v0) * z / rig.focal_px
    return x, y
