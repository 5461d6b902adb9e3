"""Grouping of R cells into reducers and the replication cost model."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from pgbj.bounds import PivotDistanceCache
from pgbj.partitioner import Assignments, SummaryTables
from pgbj.pivots import PivotSet


class GroupingStrategy(str, enum.Enum):
    GEOMETRIC = "GEOMETRIC"
    GREEDY = "GREEDY"
    NONE = "NONE"

    @classmethod
    def parse(cls, value: "str | GroupingStrategy") -> "GroupingStrategy":
        if isinstance(value, GroupingStrategy):
            return value
        return cls(value.upper())


@dataclass
class Grouping:
    """Disjoint groups of R cells.

    ``group_of[i]`` is -1 for cells with no R objects. ``history`` records,
    for each step of the balancing loop, the receiving group, the cell it
    received and the per-group R counts just before the step.
    """

    num_groups: int
    group_of: np.ndarray
    members: list[list[int]]
    history: list[tuple[int, int, tuple[int, ...]]] = field(default_factory=list, repr=False)

    @classmethod
    def from_members(cls, members: list[list[int]], num_partitions: int, history=None) -> "Grouping":
        group_of = np.full(num_partitions, -1, dtype=np.int64)
        for g, cells in enumerate(members):
            group_of[cells] = g
        return cls(len(members), group_of, [sorted(c) for c in members], history or [])

    def group_counts(self, tables: SummaryTables) -> np.ndarray:
        return np.array([int(tables.r_count[c].sum()) for c in self.members], dtype=np.int64)


def _live_cells(tables: SummaryTables, N: int) -> np.ndarray:
    live = np.flatnonzero(tables.r_count > 0)
    if N < 1:
        raise ValueError("num_groups must be >= 1")
    if N > len(live):
        raise ValueError(f"num_groups={N} exceeds the {len(live)} non-empty R partitions")
    return live


def _seed_groups(live: np.ndarray, dist: np.ndarray, N: int) -> tuple[list[list[int]], list[int]]:
    """Farthest-first seeding: one cell per group, spread as far apart as possible."""
    sub = dist[np.ix_(live, live)]
    first = int(np.argmax(sub.sum(axis=1)))
    seeds = [first]
    taken = np.zeros(len(live), dtype=bool)
    taken[first] = True
    to_seeds = sub[:, first].copy()
    for _ in range(1, N):
        nxt = int(np.argmax(np.where(taken, -np.inf, to_seeds)))
        seeds.append(nxt)
        taken[nxt] = True
        to_seeds += sub[:, nxt]
    members = [[int(live[s])] for s in seeds]
    remaining = [int(c) for c in live[~taken]]
    return members, remaining


def geometric_grouping(pv: PivotSet, tables: SummaryTables, cache: PivotDistanceCache, N: int) -> Grouping:
    live = _live_cells(tables, N)
    dist = cache.matrix
    members, remaining = _seed_groups(live, dist, N)
    counts = [int(tables.r_count[g[0]]) for g in members]
    # summed distance from every pivot to each group's pivots
    closeness = np.stack([dist[:, g[0]].copy() for g in members])
    history = []
    rem = np.array(remaining, dtype=np.int64)
    while len(rem):
        g = int(np.argmin(counts))
        pick = int(rem[np.argmin(closeness[g, rem])])
        history.append((g, pick, tuple(counts)))
        members[g].append(pick)
        counts[g] += int(tables.r_count[pick])
        closeness[g] += dist[:, pick]
        rem = rem[rem != pick]
    return Grouping.from_members(members, tables.num_partitions, history)


def qualifying_cells(tables: SummaryTables, lb: np.ndarray) -> np.ndarray:
    """``q[j, i]``: some object of S-cell j may be needed by R-cell i (LB <= U(P_j^S))."""
    return lb <= tables.s_upper[:, None]


def greedy_step(
    tables: SummaryTables, qual: np.ndarray, covered: np.ndarray, candidates: np.ndarray
) -> tuple[int, np.ndarray]:
    """Candidate adding the fewest new S objects to a group covering ``covered``.

    Returns the chosen cell and the increment of every candidate.
    """
    fresh = qual[:, candidates] & ~covered[:, None]
    increments = tables.s_count @ fresh
    return int(candidates[np.argmin(increments)]), increments


def greedy_grouping(pv: PivotSet, tables: SummaryTables, lb: np.ndarray, N: int) -> Grouping:
    live = _live_cells(tables, N)
    dist = PivotDistanceCache(pv).matrix
    members, remaining = _seed_groups(live, dist, N)
    qual = qualifying_cells(tables, lb)
    counts = [int(tables.r_count[g[0]]) for g in members]
    covered = [qual[:, g[0]].copy() for g in members]
    history = []
    rem = np.array(remaining, dtype=np.int64)
    while len(rem):
        g = int(np.argmin(counts))
        pick, _ = greedy_step(tables, qual, covered[g], rem)
        history.append((g, pick, tuple(counts)))
        members[g].append(pick)
        counts[g] += int(tables.r_count[pick])
        covered[g] |= qual[:, pick]
        rem = rem[rem != pick]
    return Grouping.from_members(members, tables.num_partitions, history)


def singleton_grouping(tables: SummaryTables) -> Grouping:
    live = np.flatnonzero(tables.r_count > 0)
    return Grouping.from_members([[int(c)] for c in live], tables.num_partitions)


def group_lb(lb: np.ndarray, g: Grouping) -> np.ndarray:
    """``glb[j, gi]``: min of ``lb[j, i]`` over the cells of group gi."""
    return np.stack([lb[:, cells].min(axis=1) for cells in g.members], axis=1)


def predicted_replication(s_asg: Assignments, glb: np.ndarray) -> int:
    """Number of S replicas shipped to reducers, counted from the pivot distances."""
    total = 0
    order = np.lexsort((s_asg.dist, s_asg.partition))
    part, dist = s_asg.partition[order], s_asg.dist[order]
    cells, starts = np.unique(part, return_index=True)
    ends = np.append(starts[1:], len(part))
    for j, a, b in zip(cells, starts, ends):
        below = np.searchsorted(dist[a:b], glb[j], side="left")
        total += int(((b - a) - below).sum())
    return total


def replica_sets(s_asg: Assignments, glb: np.ndarray) -> list[set[int]]:
    """Exact per-group replica sets: the object-level count behind the partition-level estimate."""
    out = []
    for gi in range(glb.shape[1]):
        keep = s_asg.dist >= glb[s_asg.partition, gi]
        out.append(set(s_asg.ids[keep].tolist()))
    return out


def approx_replica_cells(tables: SummaryTables, glb: np.ndarray) -> list[set[int]]:
    """Partition-level replica estimate: whole S cells whose U reaches the group LB."""
    q = glb <= tables.s_upper[:, None]
    return [set(np.flatnonzero(q[:, gi]).tolist()) for gi in range(glb.shape[1])]
