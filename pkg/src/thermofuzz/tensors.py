"""Synthetic test inputs: camera images and voxelized LiDAR point clouds."""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import counter_stream
from .graph import ModelGraph

__all__ = [
    "CameraConfig",
    "VoxelGridConfig",
    "gen_inputs",
    "input_mean",
    "load_points",
    "load_tensor",
    "prepare_image",
    "save_points",
    "save_tensor",
    "synthetic_image",
    "synthetic_point_cloud",
    "voxelize",
]


@dataclass(frozen=True)
class CameraConfig:
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError("camera height and width must be >= 1")


@dataclass(frozen=True)
class VoxelGridConfig:
    bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    resolution: tuple[int, int, int]

    def __post_init__(self) -> None:
        if len(self.bounds) != 3 or len(self.resolution) != 3:
            raise ValueError("voxel grids are three-dimensional")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"bound max must exceed min, got ({lo}, {hi})")
        if any(r < 1 for r in self.resolution):
            raise ValueError("resolution must be >= 1 per axis")


DEFAULT_LIDAR_BOUNDS = ((0.0, 40.0), (-20.0, 20.0), (-2.0, 2.0))


def _bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize of an (H, W, C) array."""
    h, w = img.shape[:2]

    def axis(n_in: int, n_out: int):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def prepare_image(raw: np.ndarray, config: CameraConfig) -> np.ndarray:
    """Scale so the image covers the camera frame, then centre-crop to it."""
    raw = np.asarray(raw)
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {raw.shape}")
    img = raw.astype(np.float64)
    if np.issubdtype(raw.dtype, np.integer):
        img = img / 255.0
    big_h, big_w = raw.shape[:2]
    scale = max(config.height / big_h, config.width / big_w)
    sh = max(config.height, round(big_h * scale))
    sw = max(config.width, round(big_w * scale))
    if (sh, sw) != (big_h, big_w):
        img = _bilinear(img, sh, sw)
    top = (sh - config.height) // 2
    left = (sw - config.width) // 2
    out = img[top:top + config.height, left:left + config.width]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def voxelize(points: np.ndarray | Sequence[Sequence[float]], config: VoxelGridConfig) -> np.ndarray:
    """Occupancy-count grid of shape ``config.resolution``.

    Points outside the bounds are dropped. Cells are half-open, so a point on
    an interior boundary lands in the cell that starts there; points on the
    upper bound of an axis go to the last cell.
    """
    grid = np.zeros(config.resolution, dtype=np.float32)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not len(pts):
        return grid
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    lo = np.array([b[0] for b in config.bounds])
    hi = np.array([b[1] for b in config.bounds])
    res = np.array(config.resolution)
    inside = np.all((pts >= lo) & (pts <= hi), axis=1)
    pts = pts[inside]
    idx = np.floor((pts - lo) / (hi - lo) * res).astype(int)
    idx = np.minimum(idx, res - 1)
    np.add.at(grid, (idx[:, 0], idx[:, 1], idx[:, 2]), 1.0)
    return grid


def synthetic_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """A smooth RGB road-scene stand-in: sky/road gradient plus a few blobs."""
    yy, xx = np.mgrid[0:height, 0:width] / np.array([max(height - 1, 1), max(width - 1, 1)])[:, None, None]
    img = np.empty((height, width, 3))
    horizon = rng.uniform(0.3, 0.6)
    sky = yy < horizon
    img[..., 0] = np.where(sky, 0.4 + 0.3 * yy, 0.3 + 0.2 * xx)
    img[..., 1] = np.where(sky, 0.6 + 0.2 * yy, 0.3 + 0.1 * yy)
    img[..., 2] = np.where(sky, 0.9 - 0.2 * yy, 0.3)
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0, 1, 2)
        rad = rng.uniform(0.05, 0.25)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * rad**2))
        img += blob[..., None] * rng.uniform(-0.4, 0.4, 3)
    img += rng.normal(0.0, 0.02, img.shape)
    return np.clip(img, 0.0, 1.0)


def synthetic_point_cloud(rng: np.random.Generator, n: int = 256,
                          bounds=DEFAULT_LIDAR_BOUNDS) -> np.ndarray:
    """Ground returns plus a few box-shaped obstacles, with some strays."""
    (x0, x1), (y0, y1), (z0, z1) = bounds
    n_ground = n // 2
    ground = np.column_stack([
        rng.uniform(x0, x1, n_ground),
        rng.uniform(y0, y1, n_ground),
        rng.normal(z0 + 0.3 * (z1 - z0), 0.05, n_ground),
    ])
    objs = []
    rest = n - n_ground
    n_obj = int(rng.integers(1, 4))
    for i in range(n_obj):
        m = rest // n_obj + (1 if i < rest % n_obj else 0)
        c = rng.uniform([x0, y0, z0], [x1, y1, z1])
        size = rng.uniform(0.5, 3.0, 3)
        objs.append(c + rng.uniform(-0.5, 0.5, (m, 3)) * size)
    cloud = np.vstack([ground, *objs])
    return cloud


def gen_inputs(graph: ModelGraph, rng_seed: int) -> list[np.ndarray]:
    """One deterministic tensor per graph input, in ascending vertex id order.

    Image inputs are rendered larger than the camera frame and then scaled
    and cropped; voxel inputs come from a synthetic point cloud; sequence
    inputs are drawn directly.
    """
    tensors = []
    for vid in sorted(graph.inputs):
        spec = graph.vertices[vid]
        modality = graph.inputs[vid]
        rng = counter_stream(rng_seed, vid)
        shape = spec.shape
        if modality == "image" and len(shape) == 3 and shape[2] == 3:
            h, w = shape[:2]
            raw_h = h + int(rng.integers(0, h + 1))
            raw_w = w + int(rng.integers(0, w + 1))
            tensors.append(prepare_image(synthetic_image(rng, raw_h, raw_w), CameraConfig(h, w)))
        elif modality == "voxel" and len(shape) == 3:
            cloud = synthetic_point_cloud(rng, n=max(64, math.prod(shape)))
            tensors.append(voxelize(cloud, VoxelGridConfig(DEFAULT_LIDAR_BOUNDS, shape)))
        else:
            tensors.append(rng.standard_normal(shape).astype(np.float32))
    return tensors


def input_mean(tensors: Sequence[np.ndarray]) -> float:
    """Mean over every element of every tensor."""
    if not tensors:
        return 0.0
    flat = np.concatenate([np.asarray(t, dtype=np.float64).ravel() for t in tensors])
    return float(flat.mean()) if flat.size else 0.0


# ---------------------------------------------------------------------------
# on-disk containers

_DTYPES = {"fp32": "<f4", "fp16": "<f2", "int8": "i1", "fp64": "<f8"}


def save_tensor(path: str | Path, array: np.ndarray, dtype: str = "fp32") -> None:
    """JSON header with a base64 little-endian payload."""
    arr = np.ascontiguousarray(array, dtype=_DTYPES[dtype])
    doc = {
        "shape": list(arr.shape),
        "dtype": dtype,
        "encoding": "base64",
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("encoding", "base64") != "base64":
        raise ValueError(f"unsupported tensor encoding {doc['encoding']!r}")
    raw = base64.b64decode(doc["data"])
    return np.frombuffer(raw, dtype=_DTYPES[doc["dtype"]]).reshape(doc["shape"]).copy()


def save_points(path: str | Path, points: np.ndarray) -> None:
    np.savetxt(path, np.asarray(points, dtype=np.float64).reshape(-1, 3), delimiter=",", fmt="%.9g")


def load_points(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2).reshape(-1, 3)
