"""Two-stage rigid alignment: closed-form fit from picked landmark pairs,
then ICP refinement.

Convention: every transform maps the FLOATING (later-visit) cloud into the
REFERENCE (first-visit) frame, i.e. reference ~= R @ floating + t.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import CloudTwinError, DegenerateGeometryError, EmptyCloudError, ParseError
from .kdtree import KdIndex

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise CloudTwinError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise CloudTwinError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self ∘ other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def to_quaternion(self) -> np.ndarray:
        """Unit quaternion (w, x, y, z) of the rotation part."""
        from scipy.spatial.transform import Rotation
        x, y, z, w = Rotation.from_matrix(self.rotation).as_quat()
        q = np.array([w, x, y, z])
        return -q if q[0] < 0 else q

    @classmethod
    def from_quaternion(cls, wxyz, translation) -> "RigidTransform":
        from scipy.spatial.transform import Rotation
        w, x, y, z = wxyz
        R = Rotation.from_quat([x, y, z, w]).as_matrix()
        return cls(R, np.asarray(translation, dtype=np.float64))

    def rotation_angle_deg(self) -> float:
        """Magnitude of the rotation, in degrees."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


@dataclass(frozen=True)
class CorrespondenceSet:
    """User-picked landmark pairs (reference point, floating point)."""

    reference: np.ndarray
    floating: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=np.float64).reshape(-1, 3)
        flo = np.asarray(self.floating, dtype=np.float64).reshape(-1, 3)
        if ref.shape != flo.shape:
            raise CloudTwinError("reference/floating pair count mismatch")
        if ref.shape[0] < 3:
            raise CloudTwinError(f"need at least 3 pairs, got {ref.shape[0]}")
        centered = ref - ref.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        if sv[1] <= 1e-9 * sv[0]:
            raise DegenerateGeometryError("reference landmarks are collinear")
        object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "floating", flo)

    def __len__(self) -> int:
        return self.reference.shape[0]


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    rmse_history: list[float]
    iterations: int
    converged: bool

    @property
    def final_rmse(self) -> float:
        return self.rmse_history[-1]


def apply_transform(cloud: PointCloud, transform: RigidTransform) -> PointCloud:
    """New cloud with every point mapped through the transform; colors kept."""
    return PointCloud(transform.apply(cloud.points), cloud.colors, cloud.label)


def _solve_rigid(src: np.ndarray, dst: np.ndarray) -> tuple[RigidTransform, float]:
    """Least-squares rigid transform mapping src onto dst (Kabsch/SVD).

    Cross-covariance SVD with the standard reflection fix: if the candidate
    rotation has det -1, the last singular vector's sign is flipped.
    """
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = cd - R @ cs
    T = RigidTransform(R, t)
    rmse = float(np.sqrt(np.mean(np.sum((T.apply(src) - dst) ** 2, axis=1))))
    return T, rmse


def rough_align(correspondences: CorrespondenceSet) -> tuple[RigidTransform, float]:
    """Closed-form transform mapping floating landmarks onto reference ones.

    Returns (transform, residual RMSE over the pairs).
    """
    return _solve_rigid(correspondences.floating, correspondences.reference)


def icp_refine(
    reference: PointCloud,
    floating: PointCloud,
    initial: RigidTransform | None = None,
    max_iterations: int = 50,
    rmse_delta_tol: float = 1e-6,
    trim_fraction: float = 1.0,
) -> IcpResult:
    """Point-to-point ICP minimizing summed squared nearest-neighbor distance.

    Each iteration: transform floating by the current estimate, match every
    floating point to its nearest reference point, optionally keep only the
    trim_fraction of matches with smallest distances, re-solve the rigid fit
    on the kept matches, compose. Stops when the RMSE change drops below
    rmse_delta_tol or after max_iterations; non-convergence is reported via
    the flag, not an error.
    """
    if len(reference) == 0 or len(floating) == 0:
        raise EmptyCloudError("ICP requires two non-empty clouds")
    if not 0.5 <= trim_fraction <= 1.0:
        raise CloudTwinError("trim_fraction must be in [0.5, 1.0]")
    if initial is None:
        initial = RigidTransform.identity()

    index = KdIndex(reference)
    ref_pts = reference.points
    flo_pts = floating.points
    n_keep = max(3, int(round(trim_fraction * len(floating))))

    current = initial
    best = initial
    best_rmse = np.inf
    history: list[float] = []
    converged = False
    for _ in range(max_iterations):
        moved = current.apply(flo_pts)
        nn_idx, nn_dist = index.nearest_batch(moved)
        if n_keep < len(floating):
            keep = np.sort(np.argsort(nn_dist, kind="stable")[:n_keep])
        else:
            keep = slice(None)
        rmse = float(np.sqrt(np.mean(nn_dist[keep] ** 2)))
        history.append(rmse)
        if rmse < best_rmse:
            best_rmse, best = rmse, current
        if rmse == 0.0 or (len(history) >= 2
                           and abs(history[-2] - history[-1]) < rmse_delta_tol):
            converged = True
            break
        # solving against the original floating points yields the composed
        # transform directly
        current, _ = _solve_rigid(flo_pts[keep], ref_pts[nn_idx[keep]])
    # the re-solve can only hold or improve the objective, so the best-RMSE
    # estimate is normally the last one; returning it also guarantees an
    # exact initial guess is never degraded
    return IcpResult(best, history, len(history), converged)


def load_correspondences(path) -> CorrespondenceSet:
    """Read landmark pairs: one "xr yr zr xf yf zf [label]" line per pair."""
    path = Path(path)
    ref, flo, labels = [], [], []
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 6:
                raise ParseError(
                    f"expected at least 6 fields, got {len(parts)}",
                    path=path, line=lineno)
            try:
                vals = [float(p) for p in parts[:6]]
            except ValueError:
                raise ParseError("bad coordinate value", path=path, line=lineno)
            ref.append(vals[:3])
            flo.append(vals[3:])
            labels.append(" ".join(parts[6:]))
    if not ref:
        raise ParseError("no correspondence pairs found", path=path)
    return CorrespondenceSet(np.array(ref), np.array(flo), tuple(labels))
