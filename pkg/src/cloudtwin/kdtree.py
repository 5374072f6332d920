"""Static KD-tree for exact nearest-neighbor queries.

Median splits on the widest-spread axis, flat node arrays, and numba-jitted
build/query kernels. Points are reordered into leaf-contiguous storage at
build time so leaf scans stay cache-friendly at the multi-million-point
scale. Exact search only: distance ties are broken by the smallest point
index so results are reproducible across runs, platforms, and worker
counts. Squared distances are used internally; the square root is taken
once at the API boundary.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .cloud import PointCloud
from .errors import EmptyCloudError

_STACK = 128  # worst-case depth is ~log2(n) + slack; 128 covers any realistic n


@njit(cache=True)
def _median_partition(pts, perm, s, e, mid, ax):
    """Quickselect on perm[s:e] keyed by pts[perm, ax] so that the element at
    mid is in sorted position (left half <=, right half >=)."""
    lo, hi = s, e - 1
    while lo < hi:
        pivot = pts[perm[(lo + hi) // 2], ax]
        i, j = lo, hi
        while i <= j:
            while pts[perm[i], ax] < pivot:
                i += 1
            while pts[perm[j], ax] > pivot:
                j -= 1
            if i <= j:
                perm[i], perm[j] = perm[j], perm[i]
                i += 1
                j -= 1
        if mid <= j:
            hi = j
        elif mid >= i:
            lo = i
        else:
            break


@njit(cache=True)
def _build_nodes(pts, perm, leaf_capacity, axis, split, left, right, start, end):
    """Iterative median-split build; returns the number of nodes used."""
    task_node = np.empty(_STACK, np.int64)
    task_s = np.empty(_STACK, np.int64)
    task_e = np.empty(_STACK, np.int64)
    n_nodes = 1
    task_node[0] = 0
    task_s[0] = 0
    task_e[0] = pts.shape[0]
    top = 1
    while top > 0:
        top -= 1
        nid = task_node[top]
        s = task_s[top]
        e = task_e[top]
        if e - s <= leaf_capacity:
            axis[nid] = -1
            start[nid] = s
            end[nid] = e
            continue
        # widest-spread axis over the range
        best_ax = 0
        best_spread = -1.0
        for ax in range(3):
            lo = pts[perm[s], ax]
            hi = lo
            for k in range(s + 1, e):
                v = pts[perm[k], ax]
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
            if hi - lo > best_spread:
                best_spread = hi - lo
                best_ax = ax
        mid = (s + e) // 2
        _median_partition(pts, perm, s, e, mid, best_ax)
        axis[nid] = best_ax
        split[nid] = pts[perm[mid], best_ax]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[nid] = lid
        right[nid] = rid
        task_node[top] = lid
        task_s[top] = s
        task_e[top] = mid
        top += 1
        task_node[top] = rid
        task_s[top] = mid
        task_e[top] = e
        top += 1
    return n_nodes


@njit(cache=True)
def _query_one(pts_r, perm, axis, split, left, right, start, end, qx, qy, qz):
    stack = np.empty(_STACK, np.int32)
    stack[0] = 0
    top = 1
    best_d2 = np.inf
    best_i = -1
    while top > 0:
        top -= 1
        nid = stack[top]
        ax = axis[nid]
        if ax < 0:
            for k in range(start[nid], end[nid]):
                dx = pts_r[k, 0] - qx
                dy = pts_r[k, 1] - qy
                dz = pts_r[k, 2] - qz
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best_d2 or (d2 == best_d2 and perm[k] < best_i):
                    best_d2 = d2
                    best_i = perm[k]
        else:
            if ax == 0:
                diff = qx - split[nid]
            elif ax == 1:
                diff = qy - split[nid]
            else:
                diff = qz - split[nid]
            if diff <= 0.0:
                near, far = left[nid], right[nid]
            else:
                near, far = right[nid], left[nid]
            # <= keeps equal-distance candidates on the far side reachable,
            # which the smallest-index tie rule needs
            if diff * diff <= best_d2:
                stack[top] = far
                top += 1
            stack[top] = near
            top += 1
    return best_i, best_d2


@njit(cache=True, parallel=True)
def _query_batch(pts_r, perm, axis, split, left, right, start, end, queries, out_i, out_d2):
    for j in prange(queries.shape[0]):
        i, d2 = _query_one(
            pts_r, perm, axis, split, left, right, start, end,
            queries[j, 0], queries[j, 1], queries[j, 2],
        )
        out_i[j] = i
        out_d2[j] = d2


def _spread_bits(v: np.ndarray) -> np.ndarray:
    """Spread 10-bit integers so their bits sit three apart (Morton)."""
    v = v.astype(np.uint64)
    v = (v | (v << 16)) & np.uint64(0x30000FF)
    v = (v | (v << 8)) & np.uint64(0x300F00F)
    v = (v | (v << 4)) & np.uint64(0x30C30C3)
    v = (v | (v << 2)) & np.uint64(0x9249249)
    return v


def _morton_keys(points: np.ndarray) -> np.ndarray:
    """Z-curve keys on a 1024^3 grid over the points' bounding box."""
    lo = points.min(axis=0)
    span = points.max(axis=0) - lo
    span[span == 0] = 1.0
    cells = np.minimum((points - lo) / span * 1024.0, 1023.0).astype(np.uint64)
    return (_spread_bits(cells[:, 0])
            | (_spread_bits(cells[:, 1]) << np.uint64(1))
            | (_spread_bits(cells[:, 2]) << np.uint64(2)))


class KdIndex:
    """Immutable balanced KD-tree over a cloud's points."""

    def __init__(self, cloud: PointCloud, leaf_capacity: int = 16):
        if len(cloud) == 0:
            raise EmptyCloudError("cannot index an empty cloud")
        if leaf_capacity < 1:
            raise ValueError("leaf_capacity must be positive")
        self.cloud = cloud
        self.leaf_capacity = leaf_capacity

        pts = cloud.points
        n = pts.shape[0]
        max_nodes = 4 * (n // leaf_capacity + 1) + 8
        perm = np.arange(n, dtype=np.int64)
        axis = np.empty(max_nodes, np.int8)
        split = np.zeros(max_nodes, np.float64)
        left = np.full(max_nodes, -1, np.int32)
        right = np.full(max_nodes, -1, np.int32)
        start = np.zeros(max_nodes, np.int64)
        end = np.zeros(max_nodes, np.int64)
        n_nodes = _build_nodes(pts, perm, leaf_capacity, axis, split, left, right, start, end)
        self._perm = perm
        self._pts_r = np.ascontiguousarray(pts[perm])  # leaf-contiguous copy
        self._axis = axis[:n_nodes].copy()
        self._split = split[:n_nodes].copy()
        self._left = left[:n_nodes].copy()
        self._right = right[:n_nodes].copy()
        self._start = start[:n_nodes].copy()
        self._end = end[:n_nodes].copy()

    @property
    def _args(self):
        return (self._pts_r, self._perm, self._axis, self._split,
                self._left, self._right, self._start, self._end)

    def nearest(self, query) -> tuple[int, float]:
        """Index and Euclidean distance of the nearest indexed point."""
        q = np.asarray(query, dtype=np.float64)
        i, d2 = _query_one(*self._args, q[0], q[1], q[2])
        return int(i), float(np.sqrt(d2))

    def nearest_batch(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest() over an (m, 3) query array.

        Large batches are processed in Morton (z-curve) order so nearby
        queries reuse the same subtrees; the output stays in input order.
        """
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        m = queries.shape[0]
        out_i = np.empty(m, np.int64)
        out_d2 = np.empty(m, np.float64)
        if m > 4096:
            order = np.argsort(_morton_keys(queries), kind="stable")
            _query_batch(*self._args, np.ascontiguousarray(queries[order]),
                         out_i, out_d2)
            inv = np.empty(m, np.int64)
            inv[order] = np.arange(m)
            return out_i[inv], np.sqrt(out_d2[inv])
        _query_batch(*self._args, queries, out_i, out_d2)
        return out_i, np.sqrt(out_d2)


def build_index(cloud: PointCloud, leaf_capacity: int = 16) -> KdIndex:
    return KdIndex(cloud, leaf_capacity)


def nearest(index: KdIndex, query) -> tuple[int, float]:
    return index.nearest(query)
