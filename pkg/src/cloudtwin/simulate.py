"""Synthetic deterioration injection for pipeline validation.

Two simulations on a slender box-shaped element of a wall:

- crack-like edge: recolor the selected points (default black), geometry
  untouched — a visual false positive;
- true crack: displace the selected points along the wall normal into the
  wall by a given depth, colors untouched.

Also provides the synthetic planar wall generator used by the tests and
benchmarks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import (
    CloudTwinError,
    DegenerateGeometryError,
    EmptySelectionError,
    ParseError,
)
from .regions import ObbRegion

SLENDERNESS_RATIO = 0.2


@dataclass(frozen=True)
class SlenderElement:
    """A narrow box delimiting a crack-shaped element: the two smallest half
    extents must each be under 0.2x the largest."""

    selection: ObbRegion
    source_label: str = ""

    def __post_init__(self):
        h = np.sort(self.selection.half_extents)
        if h[0] >= SLENDERNESS_RATIO * h[2] or h[1] >= SLENDERNESS_RATIO * h[2]:
            raise CloudTwinError(
                f"element is not slender: half_extents {h} need the two "
                f"smallest each < {SLENDERNESS_RATIO} x the largest")


@dataclass(frozen=True)
class PlaneFit:
    centroid: np.ndarray
    unit_normal: np.ndarray
    rms_residual: float

    def __post_init__(self):
        n = np.asarray(self.unit_normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise CloudTwinError("plane normal must have unit length")
        if self.rms_residual < 0:
            raise CloudTwinError("plane residual must be nonnegative")
        object.__setattr__(self, "unit_normal", n)
        object.__setattr__(
            self, "centroid", np.asarray(self.centroid, dtype=np.float64).reshape(3))


def fit_plane(cloud: PointCloud) -> PlaneFit:
    """Least-squares plane through the points.

    Centroid plus the smallest principal axis of the position covariance.
    The normal sign is fixed so its z component is >= 0; on a z tie, y >= 0,
    then x >= 0.
    """
    pts = cloud.points
    if len(pts) < 3:
        raise DegenerateGeometryError("plane fit needs at least 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, sv, Vt = np.linalg.svd(centered, full_matrices=False)
    if sv[1] <= 1e-12 * sv[0]:
        raise DegenerateGeometryError("points are collinear or coincident")
    normal = Vt[2]
    if normal[2] < 0 or (normal[2] == 0 and (normal[1] < 0 or
                                             (normal[1] == 0 and normal[0] < 0))):
        normal = -normal
    residual = float(np.sqrt(np.mean((centered @ normal) ** 2)))
    return PlaneFit(centroid, normal / np.linalg.norm(normal), residual)


def _selected(cloud: PointCloud, element: SlenderElement) -> np.ndarray:
    mask = element.selection.contains(cloud.points)
    if not mask.any():
        raise EmptySelectionError("element selects no points")
    return mask


def simulate_crack_like_edge(
    cloud: PointCloud,
    element: SlenderElement,
    paint: tuple[int, int, int] = (0, 0, 0),
) -> PointCloud:
    """Recolor the element's points; every position stays bit-identical.

    A colorless cloud gets the neutral (128, 128, 128) base color first so
    the painted element is visible against it.
    """
    mask = _selected(cloud, element)
    if cloud.colors is not None:
        colors = cloud.colors.copy()
    else:
        colors = np.full((len(cloud), 3), 128, np.uint8)
    colors[mask] = np.asarray(paint, dtype=np.uint8)
    return PointCloud(cloud.points, colors, cloud.label)


def simulate_true_crack(
    cloud: PointCloud,
    element: SlenderElement,
    depth: float,
    normal: np.ndarray | None = None,
    into_wall: bool = True,
) -> PointCloud:
    """Displace the element's points by depth along the wall normal.

    The default direction is -normal (into the wall, modeling crack depth).
    When no normal is given it is estimated by a plane fit over the selected
    points only.
    """
    if depth <= 0:
        raise CloudTwinError("depth must be positive")
    mask = _selected(cloud, element)
    if normal is None:
        normal = fit_plane(cloud.select(mask)).unit_normal
    else:
        normal = np.asarray(normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(normal)
        if not np.isclose(norm, 1.0, atol=1e-9):
            raise CloudTwinError("supplied normal must be unit length")
    shift = -depth * normal if into_wall else depth * normal
    pts = cloud.points.copy()
    pts[mask] += shift
    return PointCloud(pts, cloud.colors, cloud.label)


def make_wall(
    extent: tuple[float, float] = (4.0, 3.0),
    density: float = 1000.0,
    sigma: float = 0.0,
    void: tuple[float, float, float, float] | None = None,
    seed: int = 0,
    color: tuple[int, int, int] | None = (170, 160, 150),
) -> PointCloud:
    """Synthetic planar wall in the xy plane.

    Uniform random sampling on a [0, w] x [0, h] rectangle at the given
    density (points per unit area), optional Gaussian out-of-plane noise of
    standard deviation sigma, and an optional (x0, y0, x1, y1) rectangular
    void (a window opening).
    """
    w, h = extent
    rng = np.random.default_rng(seed)
    n = int(round(density * w * h))
    xy = rng.uniform((0.0, 0.0), (w, h), size=(n, 2))
    if void is not None:
        x0, y0, x1, y1 = void
        inside = (xy[:, 0] >= x0) & (xy[:, 0] <= x1) & (xy[:, 1] >= y0) & (xy[:, 1] <= y1)
        xy = xy[~inside]
    z = rng.normal(0.0, sigma, size=len(xy)) if sigma > 0 else np.zeros(len(xy))
    pts = np.column_stack([xy, z])
    cols = np.tile(np.asarray(color, np.uint8), (len(pts), 1)) if color else None
    return PointCloud(pts, cols, label="synthetic-wall")


def load_simulation_spec(path) -> dict:
    """Read a simulation spec: {"element": <region>, "mode": "recolor"|"shift",
    "depth": real, "paint": [r,g,b], "normal": [x,y,z] optional}."""
    path = Path(path)
    try:
        with open(path, "r") as f:
            spec = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}", path=path)
    if "element" not in spec or "mode" not in spec:
        raise ParseError("simulation spec needs 'element' and 'mode'", path=path)
    if spec["mode"] not in ("recolor", "shift"):
        raise ParseError(f"unknown mode {spec['mode']!r}", path=path)
    if spec["mode"] == "shift" and "depth" not in spec:
        raise ParseError("'shift' mode needs a 'depth'", path=path)
    spec["element"] = SlenderElement(ObbRegion.from_dict(spec["element"]))
    return spec


def run_simulation(cloud: PointCloud, spec: dict) -> PointCloud:
    """Apply a parsed simulation spec to a cloud."""
    if spec["mode"] == "recolor":
        paint = tuple(spec.get("paint", (0, 0, 0)))
        return simulate_crack_like_edge(cloud, spec["element"], paint)
    normal = spec.get("normal")
    if normal is not None:
        normal = np.asarray(normal, dtype=np.float64)
    return simulate_true_crack(cloud, spec["element"], float(spec["depth"]), normal)
