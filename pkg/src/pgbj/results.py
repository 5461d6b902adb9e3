"""Join output and run metrics shared by every engine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class JoinResult:
    """k nearest S objects for every r, rows ordered by r id.

    ``nn_ids[row]`` / ``nn_dists[row]`` are ascending by (distance, s id).
    """

    r_ids: np.ndarray
    nn_ids: np.ndarray
    nn_dists: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.r_ids, kind="stable")
        self.r_ids = np.asarray(self.r_ids, dtype=np.int64)[order]
        self.nn_ids = np.asarray(self.nn_ids, dtype=np.int64)[order]
        self.nn_dists = np.asarray(self.nn_dists, dtype=np.float64)[order]

    @property
    def k(self) -> int:
        return self.nn_ids.shape[1]

    def __len__(self) -> int:
        return len(self.r_ids)

    def neighbors(self, r_id: int) -> list[tuple[int, float]]:
        row = int(np.searchsorted(self.r_ids, r_id))
        if row >= len(self.r_ids) or self.r_ids[row] != r_id:
            raise KeyError(r_id)
        return list(zip(self.nn_ids[row].tolist(), self.nn_dists[row].tolist()))

    @staticmethod
    def concat(parts: list["JoinResult"], k: int) -> "JoinResult":
        parts = [p for p in parts if len(p)]
        if not parts:
            return JoinResult(np.empty(0, np.int64), np.empty((0, k), np.int64), np.empty((0, k)))
        return JoinResult(
            np.concatenate([p.r_ids for p in parts]),
            np.concatenate([p.nn_ids for p in parts]),
            np.concatenate([p.nn_dists for p in parts]),
        )

    def mismatches(self, other: "JoinResult", rtol: float = 1e-9) -> list[int]:
        """r ids whose neighbour ids differ or whose distances differ beyond ``rtol``."""
        if not np.array_equal(self.r_ids, other.r_ids):
            raise ValueError("results cover different r ids")
        if self.k != other.k:
            raise ValueError("results have different k")
        bad_ids = (self.nn_ids != other.nn_ids).any(axis=1)
        bad_dist = ~np.isclose(self.nn_dists, other.nn_dists, rtol=rtol, atol=0.0).all(axis=1)
        return self.r_ids[bad_ids | bad_dist].tolist()


def topk_rows(d: np.ndarray, ids: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per row, the k smallest (distance, id) pairs of a distance matrix.

    Ties at rank k go to the smaller id.
    """
    rows, cols = d.shape
    k_eff = min(k, cols)
    if k_eff == cols:
        order = np.lexsort((np.broadcast_to(ids, d.shape), d), axis=1)
        return np.take(ids, order), np.take_along_axis(d, order, axis=1)
    part = np.argpartition(d, k_eff - 1, axis=1)[:, :k_eff]
    pd = np.take_along_axis(d, part, axis=1)
    pid = ids[part]
    order = np.lexsort((pid, pd), axis=1)
    out_ids = np.take_along_axis(pid, order, axis=1)
    out_d = np.take_along_axis(pd, order, axis=1)
    # rows with extra candidates tied at the k-th distance need the id rule
    kth = out_d[:, -1]
    tied = np.flatnonzero((d <= kth[:, None]).sum(axis=1) > k_eff)
    for r in tied:
        cand = np.flatnonzero(d[r] <= kth[r])
        pick = cand[np.lexsort((ids[cand], d[r, cand]))][:k_eff]
        out_ids[r] = ids[pick]
        out_d[r] = d[r, pick]
    return out_ids, out_d


@dataclass
class RunMetrics:
    engine: str
    k: int
    num_r: int
    num_s: int
    pairs_computed: int = 0
    partition_pairs_computed: int = 0
    shuffle_records_R: int = 0
    shuffle_records_S: int = 0
    merge_records: int = 0
    predicted_replication: int = -1
    num_pivots: int = 0
    num_groups: int = 0
    blocks_per_side: int = 0
    per_group_load: list = field(default_factory=list)
    group_sizes: list = field(default_factory=list)
    partition_sizes: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def selectivity(self) -> float:
        return self.pairs_computed / (self.num_r * self.num_s)

    @property
    def avg_replication_alpha(self) -> float:
        return self.shuffle_records_S / self.num_s

    def to_dict(self) -> dict:
        """Flat key/value document; list-valued fields stay lists."""
        out = {
            "engine": self.engine,
            "k": self.k,
            "num_r": self.num_r,
            "num_s": self.num_s,
            "pairs_computed": self.pairs_computed,
            "partition_pairs_computed": self.partition_pairs_computed,
            "selectivity": self.selectivity,
            "shuffle_records_R": self.shuffle_records_R,
            "shuffle_records_S": self.shuffle_records_S,
            "avg_replication_alpha": self.avg_replication_alpha,
            "merge_records": self.merge_records,
            "predicted_replication": self.predicted_replication,
            "num_pivots": self.num_pivots,
            "num_groups": self.num_groups,
            "blocks_per_side": self.blocks_per_side,
            "per_group_load": [int(x) for x in self.per_group_load],
        }
        out.update(size_stats("group_size", self.group_sizes))
        out.update(size_stats("partition_size", self.partition_sizes))
        for phase, seconds in self.timings.items():
            out[f"time_{phase}_s"] = seconds
        return out


def size_stats(prefix: str, sizes) -> dict:
    sizes = np.asarray(sizes, dtype=np.float64)
    if len(sizes) == 0:
        return {f"{prefix}_{s}": 0.0 for s in ("min", "max", "avg", "dev")}
    return {
        f"{prefix}_min": float(sizes.min()),
        f"{prefix}_max": float(sizes.max()),
        f"{prefix}_avg": float(sizes.mean()),
        f"{prefix}_dev": float(sizes.std()),
    }

