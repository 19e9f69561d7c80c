"""Local SAD block matching on a rectified grayscale pair and disparity/depth conversion.

Disparity and depth maps are float arrays with NaN marking invalid pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .geometry import CameraRig


@dataclass(frozen=True)
class StereoParams:
    block_size: int = 9
    max_disparity: int = 64
    uniqueness_ratio: float = 0.10
    lr_consistency_tol: float = 1.0
    texture_threshold: float = 0.0
    subpixel: bool = True

    def __post_init__(self):
        if int(self.block_size) != self.block_size or self.block_size < 3 or self.block_size % 2 == 0:
            raise ValueError(f"block_size must be an odd integer >= 3, got {self.block_size}")
        if int(self.max_disparity) != self.max_disparity or self.max_disparity < 1:
            raise ValueError(f"max_disparity must be an integer >= 1, got {self.max_disparity}")
        if self.uniqueness_ratio < 0:
            raise ValueError("uniqueness_ratio must be >= 0")
        if self.lr_consistency_tol < 0:
            raise ValueError("lr_consistency_tol must be >= 0")
        if self.texture_threshold < 0:
            raise ValueError("texture_threshold must be >= 0")
        object.__setattr__(self, "block_size", int(self.block_size))
        object.__setattr__(self, "max_disparity", int(self.max_disparity))
        object.__setattr__(self, "subpixel", bool(self.subpixel))


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma of an RGB image (BT.601), or the image itself if already single-channel."""
    img = np.asarray(img)
    if img.ndim == 2:
        return img.astype(np.uint8)
    rgb = img[..., :3].astype(np.float64)
    y = rgb @ np.array([0.299, 0.587, 0.114])
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def texture_map(img: np.ndarray, block_size: int) -> np.ndarray:
    """Block mean of the Sobel gradient magnitude."""
    f = img.astype(np.float64)
    mag = np.hypot(ndimage.sobel(f, axis=1), ndimage.sobel(f, axis=0))
    return ndimage.uniform_filter(mag, size=block_size, mode="nearest")


@numba.njit(cache=True)
def _scan(L, R, r, D, uniq, lr_tol, subpixel, textured):
    H, W = L.shape
    ND = D + 1
    disp = np.full((H, W), np.nan)
    dright = np.full((H, W), -1, dtype=np.int32)
    colsum = np.zeros((ND, W), dtype=np.int32)
    cost = np.zeros((ND, W), dtype=np.int32)
    big = np.int32(2**31 - 1)
    best = np.empty(W, dtype=np.int32)
    bestc = np.empty(W, dtype=np.int32)
    second = np.empty(W, dtype=np.int32)
    rbest = np.empty(W, dtype=np.int32)
    rbestc = np.empty(W, dtype=np.int32)
    ulo = r + D
    uhi = W - r
    if H < 2 * r + 1 or ulo >= uhi:
        return disp, dright

    for v in range(r, H - r):
        # column sums over the block rows, updated incrementally down the image
        if v == r:
            for d in range(ND):
                for u in range(d, W):
                    s = 0
                    for k in range(0, 2 * r + 1):
                        s += abs(np.int32(L[k, u]) - np.int32(R[k, u - d]))
                    colsum[d, u] = s
        else:
            a = v + r
            b = v - r - 1
            for d in range(ND):
                for u in range(d, W):
                    colsum[d, u] += abs(np.int32(L[a, u]) - np.int32(R[a, u - d])) - abs(
                        np.int32(L[b, u]) - np.int32(R[b, u - d])
                    )
        # horizontal box sums; cost[d, u] defined for u in [r + d, W - r)
        for d in range(ND):
            s = 0
            for u in range(d, d + 2 * r + 1):
                s += colsum[d, u]
            cost[d, d + r] = s
            for u in range(d + r + 1, W - r):
                s += colsum[d, u + r] - colsum[d, u - r - 1]
                cost[d, u] = s

        # left argmin, ties to smaller disparity
        for u in range(ulo, uhi):
            bestc[u] = big
            best[u] = 0
        for d in range(ND):
            for u in range(ulo, uhi):
                c = cost[d, u]
                if c < bestc[u]:
                    bestc[u] = c
                    best[u] = d
        for u in range(ulo, uhi):
            second[u] = big
        for d in range(ND):
            for u in range(ulo, uhi):
                if abs(d - best[u]) > 1:
                    c = cost[d, u]
                    if c < second[u]:
                        second[u] = c

        # right-image argmin over the candidates that exist for each column
        for u in range(r, uhi):
            rbestc[u] = big
            rbest[u] = -1
        for d in range(ND):
            for ur in range(r, uhi - d):
                c = cost[d, ur + d]
                if c < rbestc[ur]:
                    rbestc[ur] = c
                    rbest[ur] = d
        for u in range(r, uhi):
            dright[v, u] = rbest[u]

        for u in range(ulo, uhi):
            if not textured[v, u]:
                continue
            c1 = bestc[u]
            if second[u] != big and not (second[u] > c1 * (1.0 + uniq)):
                continue
            d0 = best[u]
            dr = rbest[u - d0]
            if dr < 0 or abs(d0 - dr) > lr_tol:
                continue
            val = float(d0)
            if subpixel and 0 < d0 < D:
                cm = float(cost[d0 - 1, u])
                cp = float(cost[d0 + 1, u])
                den = cm - 2.0 * c1 + cp
                if den > 0:
                    val = d0 + (cm - cp) / (2.0 * den)
            disp[v, u] = val
    return disp, dright


def match_block_lr(left: np.ndarray, right: np.ndarray, params: StereoParams):
    """Left disparity map (NaN invalid) and the integer right-image disparity map (-1 invalid)."""
    left = to_gray(left)
    right = to_gray(right)
    if left.shape != right.shape:
        raise ValueError(f"image size mismatch: {left.shape} vs {right.shape}")
    h, w = left.shape
    if params.block_size > h or params.block_size > w:
        raise ValueError(f"block size {params.block_size} larger than image {w}x{h}")
    r = params.block_size // 2
    if params.texture_threshold > 0:
        textured = texture_map(left, params.block_size) >= params.texture_threshold
    else:
        textured = np.ones(left.shape, dtype=np.bool_)
    return _scan(
        np.ascontiguousarray(left),
        np.ascontiguousarray(right),
        r,
        params.max_disparity,
        float(params.uniqueness_ratio),
        float(params.lr_consistency_tol),
        params.subpixel,
        textured,
    )


def match_block(left: np.ndarray, right: np.ndarray, params: StereoParams) -> np.ndarray:
    return match_block_lr(left, right, params)[0]


def disparity_to_depth(disp: np.ndarray, rig: CameraRig, far_clip_m: float = np.inf) -> np.ndarray:
    disp = np.asarray(disp, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = rig.focal_px * rig.baseline_m / disp
    ok = np.isfinite(disp) & (disp > 0) & (z <= far_clip_m)
    return np.where(ok, z, np.nan)


def depth_to_disparity(depth: np.ndarray, rig: CameraRig) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = rig.focal_px * rig.baseline_m / depth
    return np.where(np.isfinite(depth) & (depth > 0), d, np.nan)
