"""Oriented-box regions: ROI cropping and exclusion zones.

Boxes are oriented (axis-aligned is the special case orientation = I) since
the monitored wall is generally not axis-aligned in the site frame.
Boundary points belong to crop (inclusive) and not to exclude (strict), so
crop and exclude partition the cloud exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import CloudTwinError, ParseError
from .registration import RigidTransform

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class ObbRegion:
    """Oriented box: center, per-axis half extents, rotation matrix whose
    columns are the box axes in world coordinates."""

    center: np.ndarray
    half_extents: np.ndarray
    orientation: np.ndarray = None
    role: str = "roi"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        h = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        if np.any(h <= 0):
            raise CloudTwinError("half_extents must be positive")
        R = np.eye(3) if self.orientation is None else np.asarray(
            self.orientation, dtype=np.float64).reshape(3, 3)
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise CloudTwinError("orientation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise CloudTwinError("orientation determinant is not +1")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "orientation", R)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask: box-local coordinates within ±half_extents
        (boundary inclusive) on every axis."""
        local = (np.asarray(points, dtype=np.float64) - self.center) @ self.orientation
        return np.all(np.abs(local) <= self.half_extents, axis=-1)

    def transformed(self, transform: RigidTransform) -> "ObbRegion":
        """The region after a rigid motion of the scene."""
        return ObbRegion(
            transform.apply(self.center),
            self.half_extents,
            transform.rotation @ self.orientation,
            self.role,
        )

    def to_dict(self) -> dict:
        from scipy.spatial.transform import Rotation
        x, y, z, w = Rotation.from_matrix(self.orientation).as_quat()
        if w < 0:
            w, x, y, z = -w, -x, -y, -z
        return {
            "center": list(self.center),
            "half_extents": list(self.half_extents),
            "quaternion": [w, x, y, z],
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObbRegion":
        from scipy.spatial.transform import Rotation
        try:
            center = d["center"]
            half = d["half_extents"]
        except KeyError as e:
            raise ParseError(f"region is missing key {e}")
        if "quaternion" in d:
            w, x, y, z = d["quaternion"]
            R = Rotation.from_quat([x, y, z, w]).as_matrix()
        else:
            R = np.eye(3)
        return cls(center, half, R, d.get("role", "roi"))


def crop(cloud: PointCloud, region: ObbRegion) -> PointCloud:
    """Keep exactly the points inside the region (boundary inclusive)."""
    return cloud.select(region.contains(cloud.points))


def exclude(cloud: PointCloud, region: ObbRegion) -> PointCloud:
    """Keep the points strictly outside the region (complement of crop)."""
    return cloud.select(~region.contains(cloud.points))


def load_regions(path) -> list[ObbRegion]:
    """Read one region or a list of regions from a JSON file."""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}", path=path)
    items = data if isinstance(data, list) else [data]
    return [ObbRegion.from_dict(d) for d in items]
