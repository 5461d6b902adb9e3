"""Triangle-inequality bounds used for routing S and for pruning in the reducers."""

from __future__ import annotations

import heapq
import math

import numpy as np

from pgbj.metric import MetricKind, cdist
from pgbj.partitioner import SummaryTables
from pgbj.pivots import PivotSet


class PivotDistanceCache:
    """Symmetric matrix of pivot-to-pivot distances."""

    def __init__(self, pv: PivotSet):
        d = cdist(pv.coords, pv.coords, pv.metric)
        np.fill_diagonal(d, 0.0)
        self.matrix = d
        self.metric = pv.metric

    def __getitem__(self, ij) -> float:
        return self.matrix[ij]

    def __len__(self) -> int:
        return len(self.matrix)


def hyperplane_distance(dist_to_pi: float, dist_to_pj: float, pivot_gap: float) -> float:
    """Distance from an object in p_j's cell to the bisector of p_i and p_j (Euclidean)."""
    if pivot_gap <= 0:
        raise ValueError("coincident pivots have no separating hyperplane")
    return (dist_to_pi * dist_to_pi - dist_to_pj * dist_to_pj) / (2.0 * pivot_gap)


def hyperplane_bound(far, near, pivot_gap, metric: MetricKind):
    """Lower bound on |o, x| for every x beyond the p_i/p_j bisector.

    ``near`` is the object's distance to its own pivot and ``far`` the distance
    to the other pivot. The exact bisector distance only exists in Euclidean
    space; for L1 and LINF the metric-space bound (far - near) / 2 is used.
    Works element-wise on arrays.
    """
    if metric is MetricKind.L2:
        return (far * far - near * near) / (2.0 * pivot_gap)
    return (far - near) / 2.0


def annulus_admits(q_pivot_dist, s_pivot_dist, theta, L_part, U_part):
    """True where ``s_pivot_dist`` lies in the bounding annulus (element-wise)."""
    lo = np.maximum(L_part, q_pivot_dist - theta)
    hi = np.minimum(U_part, q_pivot_dist + theta)
    out = (lo <= s_pivot_dist) & (s_pivot_dist <= hi)
    return bool(out) if np.ndim(out) == 0 else out


def ub_point(U_PiR: float, pivot_gap: float, s_pivot_dist: float) -> float:
    return U_PiR + pivot_gap + s_pivot_dist


def lb_point(pivot_gap: float, U_PiR: float, s_pivot_dist: float) -> float:
    return max(0.0, pivot_gap - U_PiR - s_pivot_dist)


def bound_knn_theta(i: int, tables: SummaryTables, cache: PivotDistanceCache, k: int) -> float:
    """k-th smallest upper bound over the per-cell k-nearest pivot distances.

    The max-heap holds the k smallest upper bounds seen so far. Each cell's
    distances are ascending, so the scan of a cell stops at the first bound
    that cannot displace the heap top.
    """
    u = tables.r_upper[i]
    heap: list[float] = []  # negated upper bounds
    for j in range(tables.num_partitions):
        gap = cache[i, j]
        for d in tables.s_knn[j]:
            ub = ub_point(u, gap, d)
            if len(heap) < k:
                heapq.heappush(heap, -ub)
            elif -heap[0] > ub:
                heapq.heapreplace(heap, -ub)
            else:
                break
    if len(heap) < k:
        raise ValueError(f"only {len(heap)} candidates for k={k}; k must not exceed |S|")
    return -heap[0]


def compute_thetas(
    tables: SummaryTables, cache: PivotDistanceCache, k: int, slack: float = 0.0
) -> np.ndarray:
    """theta_i for every R cell; empty cells get +inf and are never consulted."""
    thetas = np.full(tables.num_partitions, math.inf)
    for i in np.flatnonzero(tables.r_count > 0):
        thetas[i] = bound_knn_theta(int(i), tables, cache, k) + slack
    return thetas


def build_lb_table(tables: SummaryTables, thetas: np.ndarray, cache: PivotDistanceCache) -> np.ndarray:
    """``lb[j, i]``: smallest pivot distance an object of S-cell j needs to reach R-cell i."""
    m = tables.num_partitions
    lb = np.full((m, m), math.inf)
    live_r = np.flatnonzero(tables.r_count > 0)
    live_s = np.flatnonzero(tables.s_count > 0)
    gaps = cache.matrix.T[np.ix_(live_s, live_r)]
    lb[np.ix_(live_s, live_r)] = gaps - tables.r_upper[live_r] - thetas[live_r]
    return lb
