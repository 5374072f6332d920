import numpy as np
import pytest

from cloudtwin import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def brute_nearest(points: np.ndarray, query: np.ndarray):
    """Linear-scan oracle with the same tie rule (smallest index wins)."""
    d2 = ((points - query) ** 2).sum(axis=1)
    i = int(np.argmin(d2))  # argmin returns the first (smallest) index on ties
    return i, float(np.sqrt(d2[i]))


def random_cloud(rng, n, lo=-5.0, hi=5.0, colors=False):
    pts = rng.uniform(lo, hi, (n, 3))
    cols = rng.integers(0, 256, (n, 3), dtype=np.uint8) if colors else None
    return PointCloud(pts, cols)


def random_rotation(rng):
    """Uniform random rotation matrix via QR with the sign fix."""
    A = rng.normal(size=(3, 3))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, 2] = -Q[:, 2]
    return Q


def rotation_about(axis, angle_rad):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle_rad) * K + (1 - np.cos(angle_rad)) * (K @ K)
