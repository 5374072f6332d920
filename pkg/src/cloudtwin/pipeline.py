"""Persistent monitoring workflow: epoch registry, epoch-pair comparison,
and decision-support report emission.

The registry is a single human-diffable JSON file. The first registered
epoch defines the reference frame; every later epoch is aligned into it by
rough landmark alignment followed by ICP. Registry writes are atomic
(write-to-temp + rename) under an advisory file lock, so concurrent CLI
invocations serialize.
"""

from __future__ import annotations

import fcntl
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .distances import DistanceField, DistanceSummary, c2c_distances, summarize, write_field_csv
from .errors import CloudTwinError, RegistryError
from .io import load_cloud, save_cloud
from .regions import ObbRegion, crop, exclude
from .registration import (
    CorrespondenceSet,
    RigidTransform,
    apply_transform,
    icp_refine,
    rough_align,
)

REGISTRY_VERSION = 1


@dataclass(frozen=True)
class EpochRecord:
    """Provenance of one field visit's cloud."""

    epoch_id: str
    captured_at: str
    cloud_path: str
    format: str | None = None
    notes: str = ""
    transform: RigidTransform | None = None
    registration_rmse: float | None = None
    flagged: bool = False

    def to_dict(self) -> dict:
        d = {
            "epoch_id": self.epoch_id,
            "captured_at": self.captured_at,
            "cloud_path": str(self.cloud_path),
            "format": self.format,
            "notes": self.notes,
            "transform": None,
            "registration_rmse": self.registration_rmse,
        }
        if self.transform is not None:
            d["transform"] = {
                "quaternion": [float(v) for v in self.transform.to_quaternion()],
                "translation": [float(v) for v in self.transform.translation],
            }
        if self.flagged:
            d["flagged"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpochRecord":
        transform = None
        if d.get("transform") is not None:
            transform = RigidTransform.from_quaternion(
                d["transform"]["quaternion"], d["transform"]["translation"])
        return cls(
            epoch_id=d["epoch_id"],
            captured_at=d.get("captured_at", ""),
            cloud_path=d["cloud_path"],
            format=d.get("format"),
            notes=d.get("notes", ""),
            transform=transform,
            registration_rmse=d.get("registration_rmse"),
            flagged=d.get("flagged", False),
        )


@contextmanager
def _registry_lock(path: Path):
    lock_path = path.with_suffix(path.suffix + ".lock")
    with open(lock_path, "w") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)


def load_registry(path) -> list[EpochRecord]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, "r") as f:
        data = json.load(f)
    if data.get("version") != REGISTRY_VERSION:
        raise RegistryError(f"unsupported registry version {data.get('version')!r}")
    return [EpochRecord.from_dict(d) for d in data["epochs"]]


def _write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")
    os.replace(tmp, path)


def save_registry(path, epochs: list[EpochRecord]) -> None:
    _write_json_atomic(Path(path), {
        "version": REGISTRY_VERSION,
        "epochs": [e.to_dict() for e in epochs],
    })


def _load_epoch_cloud(record: EpochRecord) -> PointCloud:
    try:
        return load_cloud(record.cloud_path, record.format)
    except FileNotFoundError:
        raise RegistryError(f"cloud file for epoch {record.epoch_id!r} is unreadable: "
                            f"{record.cloud_path}")


def register_epoch(
    registry_path,
    record: EpochRecord,
    correspondences: CorrespondenceSet | None = None,
    icp_params: dict | None = None,
    rmse_ceiling: float = float("inf"),
) -> EpochRecord:
    """Add an epoch to the registry, aligning it into the reference frame.

    The first epoch is stored with the identity transform and defines the
    frame. Later epochs need either landmark correspondences (rough align +
    ICP against the first epoch's cloud) or a pre-set transform on the
    record. A registration whose final RMSE exceeds rmse_ceiling is stored
    but flagged.
    """
    registry_path = Path(registry_path)
    with _registry_lock(registry_path):
        epochs = load_registry(registry_path)
        if any(e.epoch_id == record.epoch_id for e in epochs):
            raise RegistryError(f"duplicate epoch_id {record.epoch_id!r}")
        cloud = _load_epoch_cloud(record)

        if not epochs:
            stored = replace(record, transform=RigidTransform.identity(),
                             registration_rmse=0.0, flagged=False)
        elif record.transform is not None:
            stored = record
        elif correspondences is not None:
            reference_rec = epochs[0]
            reference = apply_transform(
                _load_epoch_cloud(reference_rec), reference_rec.transform)
            rough, _ = rough_align(correspondences)
            result = icp_refine(reference, cloud, rough, **(icp_params or {}))
            stored = replace(
                record,
                transform=result.transform,
                registration_rmse=result.final_rmse,
                flagged=result.final_rmse > rmse_ceiling,
            )
        else:
            raise RegistryError(
                "later epochs need correspondences or a prior transform")
        epochs.append(stored)
        save_registry(registry_path, epochs)
    return stored


def get_epoch(epochs: list[EpochRecord], epoch_id: str) -> EpochRecord:
    for e in epochs:
        if e.epoch_id == epoch_id:
            return e
    raise RegistryError(f"unknown epoch_id {epoch_id!r}")


def classify_changes(field: DistanceField, threshold: float) -> tuple[np.ndarray, float]:
    """Per-point change flags (distance strictly above threshold) and the
    flagged fraction."""
    if threshold < 0:
        raise CloudTwinError("threshold must be nonnegative")
    flags = field.distances > threshold
    fraction = float(flags.mean()) if len(field) else 0.0
    return flags, fraction


def suggested_threshold(field: DistanceField) -> float:
    """Noise-floor heuristic: median + 5 x MAD of the ROI distances."""
    d = field.distances
    med = float(np.median(d))
    mad = float(np.median(np.abs(d - med)))
    return med + 5.0 * mad


def distance_colors(distances: np.ndarray, ramp_max: float) -> np.ndarray:
    """Blue(0) -> green(mid) -> red(>= ramp_max) color ramp, uint8 RGB."""
    if ramp_max <= 0:
        ramp_max = 1.0
    t = np.clip(distances / ramp_max, 0.0, 1.0)
    rgb = np.zeros((t.size, 3), dtype=np.float64)
    lo = t <= 0.5
    s = t[lo] * 2.0
    rgb[lo, 2] = 1.0 - s
    rgb[lo, 1] = s
    s = (t[~lo] - 0.5) * 2.0
    rgb[~lo, 1] = 1.0 - s
    rgb[~lo, 0] = s
    return np.round(rgb * 255.0).astype(np.uint8)


@dataclass
class ComparisonReport:
    """Result of one epoch-pair comparison over an ROI."""

    reference_epoch: str
    floating_epoch: str
    roi: ObbRegion
    exclusions: list[ObbRegion]
    summary: DistanceSummary
    changed_fraction: float
    threshold_used: float
    suggested_threshold: float
    field: DistanceField
    floating_roi: PointCloud
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "reference_epoch": self.reference_epoch,
            "floating_epoch": self.floating_epoch,
            "roi": self.roi.to_dict(),
            "exclusions": [r.to_dict() for r in self.exclusions],
            "summary": self.summary.to_dict(),
            "changed_fraction": self.changed_fraction,
            "threshold": self.threshold_used,
            "suggested_threshold": self.suggested_threshold,
            "artifacts": {k: str(v) for k, v in self.artifacts.items()},
        }


def compare_epochs(
    registry_path,
    reference_id: str,
    floating_id: str,
    roi: ObbRegion,
    exclusions: list[ObbRegion] | None = None,
    threshold: float = 0.0,
    out_dir=None,
    ramp_max: float | None = None,
) -> ComparisonReport:
    """Align two registered epochs, restrict both to the ROI, compute the
    C2C distance field, and classify changes.

    Exclusion zones are removed before the ROI crop. When out_dir is given
    the report artifacts are written there.
    """
    exclusions = list(exclusions or [])
    epochs = load_registry(Path(registry_path))
    ref_rec = get_epoch(epochs, reference_id)
    flo_rec = get_epoch(epochs, floating_id)

    def prepared(rec: EpochRecord) -> PointCloud:
        cloud = apply_transform(_load_epoch_cloud(rec), rec.transform)
        for region in exclusions:
            cloud = exclude(cloud, region)
        return crop(cloud, roi)

    reference = prepared(ref_rec)
    floating = prepared(flo_rec)
    if len(reference) == 0 or len(floating) == 0:
        raise RegistryError("ROI contains no points after cropping")

    field_fr = c2c_distances(reference, floating)
    field_rf = c2c_distances(floating, reference)
    summary = summarize(field_rf, field_fr)
    _, fraction = classify_changes(field_fr, threshold)

    report = ComparisonReport(
        reference_epoch=reference_id,
        floating_epoch=floating_id,
        roi=roi,
        exclusions=exclusions,
        summary=summary,
        changed_fraction=fraction,
        threshold_used=threshold,
        suggested_threshold=suggested_threshold(field_fr),
        field=field_fr,
        floating_roi=floating,
    )
    if out_dir is not None:
        emit_report(report, out_dir, ramp_max=ramp_max)
    return report


def emit_report(report: ComparisonReport, out_dir, ramp_max: float | None = None) -> None:
    """Write the report artifacts: distance-colored PLY of the floating ROI
    points, CSV distance table, JSON summary, and a plain-text summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.reference_epoch}_vs_{report.floating_epoch}"

    if ramp_max is None:
        ramp_max = report.summary.p99
    colors = distance_colors(report.field.distances, ramp_max)
    colored = PointCloud(report.floating_roi.points, colors, report.floating_roi.label)
    ply_path = out_dir / f"{stem}_distances.ply"
    save_cloud(colored, ply_path, "ply-binary-le")
    report.artifacts["colored_ply"] = str(ply_path)

    csv_path = out_dir / f"{stem}_distances.csv"
    write_field_csv(report.field, report.floating_roi, csv_path)
    report.artifacts["csv"] = str(csv_path)

    json_path = out_dir / f"{stem}_summary.json"
    _write_json_atomic(json_path, report.to_dict())
    report.artifacts["json"] = str(json_path)

    txt_path = out_dir / f"{stem}_summary.txt"
    s = report.summary
    lines = [
        f"Comparison: {report.floating_epoch} vs reference {report.reference_epoch}",
        f"ROI points compared: {s.count}",
        f"Hausdorff distance: {s.hausdorff:.6g} "
        f"(directed ref->float {s.directed_h_ab:.6g}, float->ref {s.directed_h_ba:.6g})",
        f"Distances (float->ref): mean {s.mean:.6g}, median {s.median:.6g}, "
        f"p90 {s.p90:.6g}, p95 {s.p95:.6g}, p99 {s.p99:.6g}, max {s.max:.6g}",
        f"Threshold used: {report.threshold_used:.6g}",
        f"Changed fraction: {report.changed_fraction:.6g}",
        f"Suggested threshold (median + 5 x MAD): {report.suggested_threshold:.6g}",
    ]
    txt_path.write_text("\n".join(lines) + "\n")
    report.artifacts["text"] = str(txt_path)

    # refresh the JSON so it records the complete artifact list
    _write_json_atomic(json_path, report.to_dict())
