"""First job: Voronoi assignment of R and S plus the summary tables T_R / T_S."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from pgbj.metric import DataPoint, Dataset, DimensionMismatch, cdist
from pgbj.pivots import PivotSet
from pgbj.runtime import LocalRuntime

SOURCE_R = 0
SOURCE_S = 1
SOURCE_NAMES = ("R", "S")


@dataclass(frozen=True)
class AssignmentRecord:
    object: DataPoint
    source: str
    partition_id: int
    dist_to_pivot: float


@dataclass
class Assignments:
    """Job-1 output stored column-wise, canonically ordered by (source, id)."""

    source: np.ndarray
    ids: np.ndarray
    partition: np.ndarray
    dist: np.ndarray
    coords: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def take(self, rows) -> "Assignments":
        return Assignments(
            self.source[rows], self.ids[rows], self.partition[rows], self.dist[rows], self.coords[rows]
        )

    def of(self, source: int) -> "Assignments":
        return self.take(np.flatnonzero(self.source == source))

    def canonical(self) -> "Assignments":
        return self.take(np.lexsort((self.ids, self.source)))

    def record(self, row: int) -> AssignmentRecord:
        return AssignmentRecord(
            DataPoint(int(self.ids[row]), tuple(self.coords[row])),
            SOURCE_NAMES[self.source[row]],
            int(self.partition[row]),
            float(self.dist[row]),
        )

    def records(self) -> Iterator[AssignmentRecord]:
        for row in range(len(self)):
            yield self.record(row)

    @staticmethod
    def concat(parts: list["Assignments"]) -> "Assignments":
        return Assignments(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                             ("source", "ids", "partition", "dist", "coords")))


def _merge_topk(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    return np.sort(np.concatenate([a, b]), kind="stable")[:k]


@dataclass
class SummaryTables:
    """Per-partition statistics for R (count, L, U) and S (count, L, U, k smallest).

    Empty partitions have count 0, ``lower = +inf`` and ``upper = -inf``.
    """

    k: int
    r_count: np.ndarray
    r_lower: np.ndarray
    r_upper: np.ndarray
    s_count: np.ndarray
    s_lower: np.ndarray
    s_upper: np.ndarray
    s_knn: list = field(default_factory=list)

    @property
    def num_partitions(self) -> int:
        return len(self.r_count)

    @classmethod
    def empty(cls, m: int, k: int) -> "SummaryTables":
        return cls(
            k,
            np.zeros(m, dtype=np.int64), np.full(m, np.inf), np.full(m, -np.inf),
            np.zeros(m, dtype=np.int64), np.full(m, np.inf), np.full(m, -np.inf),
            [np.empty(0) for _ in range(m)],
        )

    @classmethod
    def from_assignments(cls, asg: Assignments, m: int, k: int) -> "SummaryTables":
        t = cls.empty(m, k)
        for src, (count, lower, upper) in (
            (SOURCE_R, (t.r_count, t.r_lower, t.r_upper)),
            (SOURCE_S, (t.s_count, t.s_lower, t.s_upper)),
        ):
            sel = asg.source == src
            part, dist = asg.partition[sel], asg.dist[sel]
            count += np.bincount(part, minlength=m)
            np.minimum.at(lower, part, dist)
            np.maximum.at(upper, part, dist)
            if src == SOURCE_S:
                order = np.lexsort((dist, part))
                part, dist = part[order], dist[order]
                starts = np.searchsorted(part, np.arange(m), side="left")
                for j in range(m):
                    t.s_knn[j] = dist[starts[j]:starts[j] + min(k, count[j])].copy()
        return t

    def merge(self, other: "SummaryTables") -> "SummaryTables":
        if other.num_partitions != self.num_partitions or other.k != self.k:
            raise ValueError("cannot merge summaries of different shapes")
        return SummaryTables(
            self.k,
            self.r_count + other.r_count,
            np.minimum(self.r_lower, other.r_lower),
            np.maximum(self.r_upper, other.r_upper),
            self.s_count + other.s_count,
            np.minimum(self.s_lower, other.s_lower),
            np.maximum(self.s_upper, other.s_upper),
            [_merge_topk(a, b, self.k) for a, b in zip(self.s_knn, other.s_knn)],
        )

    def equals(self, other: "SummaryTables") -> bool:
        scalars = ("r_count", "r_lower", "r_upper", "s_count", "s_lower", "s_upper")
        return (
            self.k == other.k
            and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in scalars)
            and len(self.s_knn) == len(other.s_knn)
            and all(np.array_equal(a, b) for a, b in zip(self.s_knn, other.s_knn))
        )


def assign_many(coords: np.ndarray, pv: PivotSet) -> tuple[np.ndarray, np.ndarray]:
    """Nearest pivot (lowest index on ties) and its distance for each row."""
    if coords.shape[1] != pv.dim:
        raise DimensionMismatch(f"objects have n={coords.shape[1]}, pivots have n={pv.dim}")
    d = cdist(coords, pv.coords, pv.metric)
    part = np.argmin(d, axis=1)
    return part, d[np.arange(len(coords)), part]


def assign(o: DataPoint, pv: PivotSet) -> tuple[int, float]:
    part, dist = assign_many(np.array([o.coords]), pv)
    return int(part[0]), float(dist[0])


def _map_split(split: tuple[np.ndarray, np.ndarray, np.ndarray], pv: PivotSet, k: int):
    source, ids, coords = split
    part, dist = assign_many(coords, pv)
    asg = Assignments(source, ids, part, dist, coords)
    return asg, SummaryTables.from_assignments(asg, len(pv), k)


def partition_all(
    R: Dataset,
    S: Dataset,
    pv: PivotSet,
    k: int,
    runtime: Optional[LocalRuntime] = None,
    num_splits: Optional[int] = None,
) -> tuple[Assignments, SummaryTables]:
    """Assign every object of R and S to its closest pivot and summarise the cells.

    Input is cut into ``num_splits`` splits (default: one per worker); each
    split yields a partial summary and the partials are merged on the master.
    """
    if R.dim != S.dim:
        raise DimensionMismatch(f"R has n={R.dim}, S has n={S.dim}")
    runtime = runtime or LocalRuntime(1)
    source = np.concatenate([np.full(len(R), SOURCE_R, np.int8), np.full(len(S), SOURCE_S, np.int8)])
    ids = np.concatenate([R.ids, S.ids])
    coords = np.concatenate([R.coords, S.coords])
    n_splits = max(1, min(num_splits or runtime.workers, len(ids)))
    bounds = np.linspace(0, len(ids), n_splits + 1).astype(int)
    splits = [(source[a:b], ids[a:b], coords[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    outputs = runtime.map(lambda sp: _map_split(sp, pv, k), splits)
    tables = SummaryTables.empty(len(pv), k)
    for _, partial in outputs:
        tables = tables.merge(partial)
    asg = Assignments.concat([a for a, _ in outputs]).canonical()
    return asg, tables
