"""Depth map -> obstacles: road-plane cutoff, ground occupancy, closing, components.

The occupancy image covers x in [-lateral_extent_m, lateral_extent_m] and
z in [0, max_range_m]; row index grows with z, column index with x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import geometry as geo

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class DetectorParams:
    cutoff_height_m: float = 0.3
    tilt_allowance_deg: float = 10.0
    cell_size_m: float = 0.1
    min_points_per_cell: int = 3
    closing_kernel_cells: int = 3
    min_area_cells: int = 3
    max_range_m: float = 10.0
    lateral_extent_m: float = 3.0

    def __post_init__(self):
        if not self.cutoff_height_m > 0:
            raise ValueError("cutoff_height_m must be positive")
        if not 0 <= self.tilt_allowance_deg < 45:
            raise ValueError("tilt_allowance_deg must be in [0, 45)")
        if not self.cell_size_m > 0:
            raise ValueError("cell_size_m must be positive")
        k = self.closing_kernel_cells
        if int(k) != k or k < 1 or k % 2 == 0:
            raise ValueError("closing_kernel_cells must be an odd integer >= 1")
        if self.min_points_per_cell < 1 or self.min_area_cells < 1:
            raise ValueError("min_points_per_cell and min_area_cells must be >= 1")
        if not (self.max_range_m > 0 and self.lateral_extent_m > 0):
            raise ValueError("grid extent must be positive")
        object.__setattr__(self, "closing_kernel_cells", int(k))
        object.__setattr__(self, "min_points_per_cell", int(self.min_points_per_cell))
        object.__setattr__(self, "min_area_cells", int(self.min_area_cells))

    @property
    def grid_shape(self) -> tuple[int, int]:
        rows = int(math.ceil(self.max_range_m / self.cell_size_m - 1e-9))
        cols = int(math.ceil(2 * self.lateral_extent_m / self.cell_size_m - 1e-9))
        return rows, cols


@dataclass
class OccupancyImage:
    cell_size_m: float
    x_origin_m: float  # x of the left edge of column 0
    count: np.ndarray  # points per cell
    occupied: np.ndarray  # binarized (possibly closed) image
    nearest_z: np.ndarray  # min z per cell, inf if empty
    y_min: np.ndarray  # nan if empty
    y_max: np.ndarray
    dropped: int = 0  # points outside the grid

    @property
    def shape(self) -> tuple[int, int]:
        return self.count.shape


@dataclass(frozen=True)
class DetectedObstacle:
    z_exp: float
    x_left: float
    x_right: float
    y_bottom: float
    y_top: float
    footprint: tuple[tuple[int, int], ...]  # (row, col) cells
    rect_px: tuple[float, float, float, float]

    @property
    def area_cells(self) -> int:
        return len(self.footprint)

    def to_dict(self) -> dict:
        return {
            "z_exp_m": self.z_exp,
            "x_span_m": [self.x_left, self.x_right],
            "y_span_m": [self.y_bottom, self.y_top],
            "rect_px": list(self.rect_px),
            "area_cells": self.area_cells,
        }


def cut_road_plane(points: np.ndarray, params: DetectorParams) -> np.ndarray:
    """Keep points strictly above the tilted threshold plane y = h0 + z tan(alpha)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    thr = params.cutoff_height_m + points[:, 2] * math.tan(math.radians(params.tilt_allowance_deg))
    return points[points[:, 1] > thr]


def build_occupancy(points: np.ndarray, params: DetectorParams) -> OccupancyImage:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rows, cols = params.grid_shape
    cs = params.cell_size_m
    x0 = -params.lateral_extent_m
    # small epsilon keeps points lying exactly on a cell edge in the upper cell
    r = np.floor(points[:, 2] / cs + 1e-9).astype(np.int64)
    c = np.floor((points[:, 0] - x0) / cs + 1e-9).astype(np.int64)
    inside = (points[:, 2] >= 0) & (points[:, 2] <= params.max_range_m) & (r >= 0) & (r < rows) & (c >= 0) & (c < cols)
    dropped = int(np.count_nonzero(~inside))
    idx = (r * cols + c)[inside]
    pts = points[inside]
    n = rows * cols
    count = np.bincount(idx, minlength=n)
    nearest = np.full(n, np.inf)
    np.minimum.at(nearest, idx, pts[:, 2])
    ymin = np.full(n, np.inf)
    np.minimum.at(ymin, idx, pts[:, 1])
    ymax = np.full(n, -np.inf)
    np.maximum.at(ymax, idx, pts[:, 1])
    empty = count == 0
    ymin[empty] = np.nan
    ymax[empty] = np.nan
    shape = (rows, cols)
    count = count.reshape(shape)
    return OccupancyImage(
        cs,
        x0,
        count,
        count >= params.min_points_per_cell,
        nearest.reshape(shape),
        ymin.reshape(shape),
        ymax.reshape(shape),
        dropped,
    )


def binary_closing(img: np.ndarray, k: int) -> np.ndarray:
    """Closing with a k x k square on a zero-padded plane, cropped back to the image."""
    if k == 1:
        return img.copy()
    pad = k  # a dilation followed by an erosion reaches at most k // 2 past the image
    big = np.pad(img, pad)
    se = np.ones((k, k), dtype=bool)
    closed = ndimage.binary_erosion(ndimage.binary_dilation(big, se), se, border_value=1)
    return closed[pad:-pad, pad:-pad]


def close_morphological(img: OccupancyImage, params: DetectorParams) -> OccupancyImage:
    closed = binary_closing(img.occupied, params.closing_kernel_cells)
    return OccupancyImage(img.cell_size_m, img.x_origin_m, img.count, closed, img.nearest_z, img.y_min, img.y_max, img.dropped)


def label_components(binary: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels (0 = background)."""
    return ndimage.label(binary, structure=_EIGHT)


def extract_obstacles(img: OccupancyImage, params: DetectorParams, rig: geo.CameraRig) -> list[DetectedObstacle]:
    labels, n = label_components(img.occupied)
    if n == 0:
        return []
    out = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        member = labels[sl] == k
        area = int(member.sum())
        if area < params.min_area_cells:
            continue
        nz = img.nearest_z[sl][member]
        if not np.isfinite(nz).any():
            continue  # closing-only component without measured points
        z_exp = float(nz.min())
        rr, cc = np.nonzero(member)
        rr = rr + sl[0].start
        cc = cc + sl[1].start
        x_left = img.x_origin_m + cc.min() * img.cell_size_m
        x_right = img.x_origin_m + (cc.max() + 1) * img.cell_size_m
        y_lo = np.nanmin(img.y_min[sl][member])
        y_hi = np.nanmax(img.y_max[sl][member])
        if not y_hi - y_lo > 1e-9:
            y_lo, y_hi = y_lo - img.cell_size_m / 2, y_hi + img.cell_size_m / 2
        u0, v_top = geo.project_level(rig, x_left, y_hi, z_exp)
        u1, v_bot = geo.project_level(rig, x_right, y_lo, z_exp)
        out.append(
            DetectedObstacle(
                z_exp=z_exp,
                x_left=float(x_left),
                x_right=float(x_right),
                y_bottom=float(y_lo),
                y_top=float(y_hi),
                footprint=tuple(zip(rr.tolist(), cc.tolist())),
                rect_px=(float(u0), float(v_top), float(u1), float(v_bot)),
            )
        )
    out.sort(key=lambda o: (o.z_exp, o.x_left, o.footprint))
    return out


def detect_points(points: np.ndarray, rig: geo.CameraRig, params: DetectorParams) -> list[DetectedObstacle]:
    occ = build_occupancy(cut_road_plane(points, params), params)
    return extract_obstacles(close_morphological(occ, params), params, rig)


def detect(depth: np.ndarray, rig: geo.CameraRig, params: DetectorParams) -> list[DetectedObstacle]:
    """Obstacles in a depth map (NaN or non-positive = invalid), sorted by ascending distance."""
    depth = np.asarray(depth, dtype=np.float64)
    return detect_points(geo.backproject_map(rig, depth), rig, params)
