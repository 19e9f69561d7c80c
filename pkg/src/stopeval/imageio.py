"""PGM (P5) and single-channel PFM readers/writers.

Depth maps: PFM in meters or 16-bit PGM in millimeters, invalid stored as 0.
Disparity maps: PFM in pixels, invalid stored as -1.
In memory both use NaN for invalid pixels.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    pass


def _read_header(f, ntokens: int) -> list[bytes]:
    tokens: list[bytes] = []
    while len(tokens) < ntokens:
        line = f.readline()
        if not line:
            raise FormatError("truncated header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    if len(tokens) != ntokens:
        raise FormatError("malformed header")
    return tokens


def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    if img.dtype == np.uint8:
        maxval, data = 255, img.tobytes()
    elif img.dtype == np.uint16:
        maxval, data = 65535, img.astype(">u2").tobytes()
    else:
        raise ValueError(f"PGM supports uint8 or uint16, got {img.dtype}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        f.write(data)


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, w, h, maxval = _read_header(f, 4)
        if magic != b"P5":
            raise FormatError(f"{path}: not a binary PGM")
        w, h, maxval = int(w), int(h), int(maxval)
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        buf = f.read(w * h * dtype.itemsize)
    if len(buf) != w * h * dtype.itemsize:
        raise FormatError(f"{path}: truncated pixel data")
    img = np.frombuffer(buf, dtype=dtype).reshape(h, w)
    return img.astype(np.uint8 if maxval < 256 else np.uint16)


def write_pfm(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("only single-channel PFM is supported")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (w, h))
        f.write(np.flipud(img).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, w, h, scale = _read_header(f, 4)
        if magic != b"Pf":
            raise FormatError(f"{path}: not a single-channel PFM")
        w, h, scale = int(w), int(h), float(scale)
        dtype = "<f4" if scale < 0 else ">f4"
        buf = f.read(w * h * 4)
    if len(buf) != w * h * 4:
        raise FormatError(f"{path}: truncated pixel data")
    data = np.frombuffer(buf, dtype=dtype).reshape(h, w)
    return np.flipud(data).astype(np.float32)


# -- maps with invalid markers ------------------------------------------------


def write_depth(path, depth: np.ndarray) -> None:
    path = Path(path)
    d = np.where(np.isfinite(depth) & (depth > 0), depth, 0.0)
    if path.suffix.lower() == ".pgm":
        mm = np.clip(np.rint(d * 1000.0), 0, 65535).astype(np.uint16)
        write_pgm(path, mm)
    else:
        write_pfm(path, d)


def read_depth(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        raw = read_pgm(path).astype(np.float64) / 1000.0
    else:
        raw = read_pfm(path).astype(np.float64)
    return np.where(raw > 0, raw, np.nan)


def write_disparity(path, disp: np.ndarray) -> None:
    write_pfm(path, np.where(np.isfinite(disp), disp, -1.0))


def read_disparity(path) -> np.ndarray:
    raw = read_pfm(path).astype(np.float64)
    return np.where(raw >= 0, raw, np.nan)


_safe = re.compile(r"[^A-Za-z0-9_.-]")


def safe_name(s: str) -> str:
    return _safe.sub("_", s)
