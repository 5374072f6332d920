"""Core point-cloud container and geometric primitives.

A cloud is a fixed (n, 3) float64 position array plus an optional parallel
(n, 3) uint8 color array. Arrays are frozen after construction so clouds can
be shared read-only across workers; every mutation produces a new cloud.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CloudTwinError, EmptyCloudError

DEFAULT_COLOR = (128, 128, 128)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box; min <= max componentwise."""

    min: np.ndarray
    max: np.ndarray

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max - self.min))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return np.all((points >= self.min) & (points <= self.max), axis=-1)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PointCloud:
    """One epoch's scan: positions, optional RGB colors, and a label."""

    points: np.ndarray
    colors: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise CloudTwinError(f"points must be (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise CloudTwinError("non-finite coordinate in point cloud")
        object.__setattr__(self, "points", _freeze(pts))
        if self.colors is not None:
            cols = np.asarray(self.colors)
            if cols.shape != pts.shape:
                raise CloudTwinError(
                    f"colors shape {cols.shape} does not match points shape {pts.shape}"
                )
            if cols.dtype != np.uint8:
                if np.any((cols < 0) | (cols > 255)):
                    raise CloudTwinError("color channel outside [0, 255]")
                cols = cols.astype(np.uint8)
            object.__setattr__(self, "colors", _freeze(np.ascontiguousarray(cols)))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_colors(self) -> bool:
        return self.colors is not None

    def with_label(self, label: str) -> "PointCloud":
        return PointCloud(self.points, self.colors, label)

    def select(self, mask_or_indices) -> "PointCloud":
        """New cloud keeping the given points, relative order preserved."""
        pts = self.points[mask_or_indices]
        cols = self.colors[mask_or_indices] if self.colors is not None else None
        return PointCloud(pts, cols, self.label)


def bounding_box(cloud: PointCloud) -> Aabb:
    """Tight axis-aligned bounds; every face touches at least one point."""
    if len(cloud) == 0:
        raise EmptyCloudError("bounding_box of empty cloud")
    return Aabb(cloud.points.min(axis=0), cloud.points.max(axis=0))


def merge(a: PointCloud, b: PointCloud) -> PointCloud:
    """Concatenate two clouds, a's points first.

    If exactly one side carries colors, the colorless side is filled with
    the neutral default (128, 128, 128) so recolored segments can be merged
    back into colorless working copies.
    """
    pts = np.vstack([a.points, b.points])
    if a.colors is None and b.colors is None:
        cols = None
    else:
        ca = a.colors if a.colors is not None else np.full((len(a), 3), DEFAULT_COLOR, np.uint8)
        cb = b.colors if b.colors is not None else np.full((len(b), 3), DEFAULT_COLOR, np.uint8)
        cols = np.vstack([ca, cb])
    return PointCloud(pts, cols, a.label or b.label)
