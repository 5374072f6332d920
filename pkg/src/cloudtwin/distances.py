"""Cloud-to-cloud distance fields and Hausdorff summaries.

Distances are unsigned point-to-nearest-point Euclidean (plain C2C). The
monitoring direction is floating (second visit) -> reference (first visit):
new material or damage shows up as large distances on second-visit points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import CloudTwinError, EmptyCloudError
from .kdtree import KdIndex


@dataclass(frozen=True)
class DistanceField:
    """Per-point nearest-neighbor distances, parallel to the floating cloud."""

    distances: np.ndarray
    reference_label: str = ""
    floating_label: str = ""

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        if d.ndim != 1:
            raise CloudTwinError("distance field must be one-dimensional")
        if d.size and (not np.all(np.isfinite(d)) or d.min() < 0):
            raise CloudTwinError("distances must be finite and nonnegative")
        d.flags.writeable = False
        object.__setattr__(self, "distances", d)

    def __len__(self) -> int:
        return self.distances.size


@dataclass(frozen=True)
class DistanceSummary:
    """Both directed Hausdorff values plus per-point statistics of the
    floating->reference field."""

    directed_h_ab: float   # reference -> floating
    directed_h_ba: float   # floating -> reference (monitoring direction)
    hausdorff: float
    mean: float
    median: float
    p50: float
    p90: float
    p95: float
    p99: float
    max: float
    count: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "directed_h_ab", "directed_h_ba", "hausdorff", "mean", "median",
            "p50", "p90", "p95", "p99", "max", "count")}


def c2c_distances(reference: PointCloud, floating: PointCloud) -> DistanceField:
    """Distance from each floating point to its nearest reference point."""
    if len(reference) == 0 or len(floating) == 0:
        raise EmptyCloudError("C2C distances require two non-empty clouds")
    index = KdIndex(reference)
    _, dist = index.nearest_batch(floating.points)
    return DistanceField(dist, reference.label, floating.label)


def directed_hausdorff(field: DistanceField) -> float:
    """Largest per-point distance of the field (max of min-distances)."""
    if len(field) == 0:
        raise EmptyCloudError("directed Hausdorff of empty field")
    return float(field.distances.max())


def summarize(field_rf: DistanceField, field_fr: DistanceField) -> DistanceSummary:
    """Build a summary from the two directed fields.

    field_rf: reference points queried against the floating cloud.
    field_fr: floating points queried against the reference cloud; per-point
    statistics are computed on this monitoring-direction field.
    """
    h_ab = directed_hausdorff(field_rf)
    h_ba = directed_hausdorff(field_fr)
    d = field_fr.distances
    p50, p90, p95, p99 = np.percentile(d, [50, 90, 95, 99])
    return DistanceSummary(
        directed_h_ab=h_ab,
        directed_h_ba=h_ba,
        hausdorff=max(h_ab, h_ba),
        mean=float(d.mean()),
        median=float(p50),
        p50=float(p50),
        p90=float(p90),
        p95=float(p95),
        p99=float(p99),
        max=float(d.max()),
        count=int(d.size),
    )


def hausdorff(reference: PointCloud, floating: PointCloud) -> DistanceSummary:
    """Symmetric Hausdorff distance plus monitoring-direction statistics."""
    field_fr = c2c_distances(reference, floating)
    field_rf = c2c_distances(floating, reference)
    return summarize(field_rf, field_fr)


def write_field_csv(field: DistanceField, floating: PointCloud, path) -> None:
    """Export "index,x,y,z,distance" rows for the floating cloud."""
    if len(field) != len(floating):
        raise CloudTwinError("field length does not match floating cloud")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "x", "y", "z", "distance"])
        for i, ((x, y, z), d) in enumerate(zip(floating.points, field.distances)):
            w.writerow([i, f"{x:.9g}", f"{y:.9g}", f"{z:.9g}", f"{d:.9g}"])
