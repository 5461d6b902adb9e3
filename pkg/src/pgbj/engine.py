"""Second job (routing, shuffle, pruned reduce), the end-to-end PGBJ pipeline
and the random-block baseline."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from pgbj.bounds import (
    PivotDistanceCache,
    annulus_admits,
    build_lb_table,
    compute_thetas,
    hyperplane_bound,
)
from pgbj.grouping import (
    Grouping,
    GroupingStrategy,
    geometric_grouping,
    greedy_grouping,
    group_lb,
    predicted_replication,
    singleton_grouping,
)
from pgbj.metric import Dataset, MetricKind, cdist, pairwise
from pgbj.oracle import brute_force_knn_join, check_k
from pgbj.partitioner import (
    SOURCE_R,
    SOURCE_S,
    AssignmentRecord,
    Assignments,
    SummaryTables,
    partition_all,
)
from pgbj.pivots import BLOCK_STREAM, PivotSet, SelectionConfig, make_rng, select_pivots
from pgbj.results import JoinResult, RunMetrics, topk_rows
from pgbj.runtime import LocalRuntime

log = logging.getLogger(__name__)

_NO_ID = np.iinfo(np.int64).max


class Engine(str, enum.Enum):
    PGBJ = "PGBJ"
    BLOCK_BASELINE = "BLOCK_BASELINE"
    ORACLE = "ORACLE"

    @classmethod
    def parse(cls, value: "str | Engine") -> "Engine":
        if isinstance(value, Engine):
            return value
        return cls(value.upper())


@dataclass
class RunConfig:
    k: int = 10
    metric: MetricKind = MetricKind.L2
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    num_groups: int = 4
    grouping: GroupingStrategy = GroupingStrategy.GEOMETRIC
    engine: Engine = Engine.PGBJ
    worker_count: int = 1
    seed: int = 0
    theta_slack: float = 0.0
    spill_dir: Optional[Path] = None

    def __post_init__(self):
        self.metric = MetricKind.parse(self.metric)
        self.grouping = GroupingStrategy.parse(self.grouping)
        self.engine = Engine.parse(self.engine)
        if self.k < 1 or self.num_groups < 1 or self.worker_count < 1:
            raise ValueError("k, num_groups and worker_count must be positive")
        if self.theta_slack < 0:
            raise ValueError("theta_slack must be non-negative")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "metric": self.metric.value,
            "strategy": self.selection.strategy.value,
            "num_pivots": self.selection.num_pivots,
            "num_trials": self.selection.num_trials,
            "sample_size": self.selection.sample_size,
            "max_iterations": self.selection.max_iterations,
            "pivot_seed": self.selection.seed,
            "num_groups": self.num_groups,
            "grouping": self.grouping.value,
            "engine": self.engine.value,
            "worker_count": self.worker_count,
            "seed": self.seed,
            "theta_slack": self.theta_slack,
            "spill_dir": None if self.spill_dir is None else str(self.spill_dir),
        }


# -- routing and shuffle ----------------------------------------------------


@dataclass(frozen=True)
class RoutedRecord:
    group_id: int
    record: AssignmentRecord


def route(record: AssignmentRecord, g: Grouping, glb: np.ndarray) -> list[RoutedRecord]:
    if record.source == "R":
        return [RoutedRecord(int(g.group_of[record.partition_id]), record)]
    groups = np.flatnonzero(glb[record.partition_id] <= record.dist_to_pivot)
    return [RoutedRecord(int(gi), record) for gi in groups]


@dataclass
class RoutedBatch:
    """Map output in columnar form: (group id, row of the assignment table)."""

    group: np.ndarray
    row: np.ndarray

    def __len__(self) -> int:
        return len(self.row)


def route_rows(asg: Assignments, rows: np.ndarray, g: Grouping, glb: np.ndarray) -> RoutedBatch:
    src = asg.source[rows]
    r_rows = rows[src == SOURCE_R]
    s_rows = rows[src == SOURCE_S]
    r_groups = g.group_of[asg.partition[r_rows]]
    hit = glb[asg.partition[s_rows]] <= asg.dist[s_rows, None]
    s_idx, s_groups = np.nonzero(hit)
    return RoutedBatch(
        np.concatenate([r_groups, s_groups]).astype(np.int64),
        np.concatenate([r_rows, s_rows[s_idx]]).astype(np.int64),
    )


@dataclass
class Bucket:
    group_id: int
    r: Assignments
    s: Assignments

    @property
    def load(self) -> int:
        return len(self.r) + len(self.s)


def shuffle(routed: RoutedBatch, num_groups: int, asg: Assignments) -> list[Bucket]:
    """Group routed records by key; inside a bucket order by (source, partition, id)."""
    if len(routed) and routed.group.max() >= num_groups:
        raise ValueError("routed record carries a group id outside 0..N-1")
    order = np.lexsort((asg.ids[routed.row], asg.partition[routed.row], asg.source[routed.row], routed.group))
    group, row = routed.group[order], routed.row[order]
    starts = np.searchsorted(group, np.arange(num_groups + 1))
    buckets = []
    for gi in range(num_groups):
        rows = row[starts[gi]:starts[gi + 1]]
        src = asg.source[rows]
        buckets.append(Bucket(gi, asg.take(rows[src == SOURCE_R]), asg.take(rows[src == SOURCE_S])))
    return buckets


# -- reduce -----------------------------------------------------------------


class PruneAudit:
    """Samples of pruning decisions, for after-the-fact verification.

    ``cells`` holds (r id, pruned S-cell, group); ``objects`` holds (r id, s id).
    """

    def __init__(self, limit: int = 20000):
        self.limit = limit
        self.cells: list[tuple[int, int, int]] = []
        self.objects: list[tuple[int, int]] = []

    def add_cells(self, r_ids, cell: int, group: int):
        room = self.limit - len(self.cells)
        self.cells.extend((int(r), cell, group) for r in r_ids[:max(room, 0)])

    def add_objects(self, r_ids, s_ids):
        room = self.limit - len(self.objects)
        if room > 0:
            self.objects.extend(zip(r_ids[:room].tolist(), s_ids[:room].tolist()))


def reduce_knn_join(
    bucket: Bucket,
    pv: PivotSet,
    tables: SummaryTables,
    cache: PivotDistanceCache,
    k: int,
    thetas: np.ndarray,
    audit: Optional[PruneAudit] = None,
) -> tuple[JoinResult, int]:
    """kNN of every r in the bucket against the bucket's S subset.

    For each R cell, S cells are visited in ascending pivot gap. A cell is
    skipped when r's distance to the bisector already exceeds the current
    k-th distance bound; otherwise only objects inside the bounding annulus
    get a real distance evaluation. Returns the fragment and the number of
    distance evaluations (object pairs plus r-to-pivot).
    """
    metric = pv.metric
    s = bucket.s
    s_cells, s_starts = np.unique(s.partition, return_index=True)
    s_ends = np.append(s_starts[1:], len(s))
    pairs = 0
    fragments = []
    for i in np.unique(bucket.r.partition):
        sel = np.flatnonzero(bucket.r.partition == i)
        r_ids, rc, rd = bucket.r.ids[sel], bucket.r.coords[sel], bucket.r.dist[sel]
        n = len(sel)
        theta_i = thetas[i]
        best_d = np.full((n, k), math.inf)
        best_id = np.full((n, k), _NO_ID, dtype=np.int64)
        thr = np.full(n, theta_i)
        visit = sorted(range(len(s_cells)), key=lambda t: (cache[i, s_cells[t]], s_cells[t]))
        for t in visit:
            j = int(s_cells[t])
            a, b = s_starts[t], s_ends[t]
            if j == i:
                r_pj = rd
                act = np.arange(n)
            else:
                r_pj = pairwise(rc, pv.coords[j], metric)
                pairs += n
                hp = hyperplane_bound(r_pj, rd, cache[i, j], metric)
                keep = hp <= thr
                if audit is not None and not keep.all():
                    audit.add_cells(r_ids[~keep], j, bucket.group_id)
                act = np.flatnonzero(keep)
                if len(act) == 0:
                    continue
            adm = annulus_admits(
                r_pj[act, None], s.dist[None, a:b], thr[act, None], tables.s_lower[j], tables.s_upper[j]
            )
            if audit is not None and not adm.all():
                ri, si = np.nonzero(~adm)
                audit.add_objects(r_ids[act[ri]], s.ids[a + si])
            ri, si = np.nonzero(adm)
            if len(ri) == 0:
                continue
            d = pairwise(rc[act[ri]], s.coords[a + si], metric)
            pairs += len(ri)
            cols, col_of = np.unique(si, return_inverse=True)
            rows, row_of = np.unique(ri, return_inverse=True)
            cand_d = np.full((len(rows), len(cols)), math.inf)
            cand_d[row_of, col_of] = d
            cand_id = np.broadcast_to(s.ids[a + cols], cand_d.shape)
            upd = act[rows]
            all_d = np.hstack([best_d[upd], cand_d])
            all_id = np.hstack([best_id[upd], cand_id])
            order = np.lexsort((all_id, all_d), axis=1)[:, :k]
            best_d[upd] = np.take_along_axis(all_d, order, axis=1)
            best_id[upd] = np.take_along_axis(all_id, order, axis=1)
            thr[upd] = np.minimum(theta_i, best_d[upd, k - 1])
        if not np.isfinite(best_d).all():
            raise RuntimeError(f"reducer {bucket.group_id}: fewer than k candidates for cell {i}")
        fragments.append(JoinResult(r_ids, best_id, best_d))
    return JoinResult.concat(fragments, k), pairs


# -- end-to-end -------------------------------------------------------------


@dataclass
class PGBJRun:
    """Everything one PGBJ execution produced, for inspection and audits."""

    result: JoinResult
    metrics: RunMetrics
    pivots: PivotSet
    assignments: Assignments
    tables: SummaryTables
    thetas: np.ndarray
    lb: np.ndarray
    grouping: Grouping
    glb: np.ndarray
    buckets: list[Bucket]


@dataclass
class JoinPlan:
    cache: PivotDistanceCache
    thetas: np.ndarray
    lb: np.ndarray
    grouping: Grouping
    glb: np.ndarray


def plan_join(pv: PivotSet, tables: SummaryTables, cfg: RunConfig) -> JoinPlan:
    """Bounds, LB table and grouping: the master-side work between the two jobs."""
    cache = PivotDistanceCache(pv)
    thetas = compute_thetas(tables, cache, cfg.k, cfg.theta_slack)
    lb = build_lb_table(tables, thetas, cache)
    if cfg.grouping is GroupingStrategy.GEOMETRIC:
        g = geometric_grouping(pv, tables, cache, cfg.num_groups)
    elif cfg.grouping is GroupingStrategy.GREEDY:
        g = greedy_grouping(pv, tables, lb, cfg.num_groups)
    else:
        g = singleton_grouping(tables)
    return JoinPlan(cache, thetas, lb, g, group_lb(lb, g))


def run_job2(
    pv: PivotSet,
    asg: Assignments,
    tables: SummaryTables,
    plan: JoinPlan,
    cfg: RunConfig,
    runtime: LocalRuntime,
    audit: Optional[PruneAudit] = None,
) -> tuple[JoinResult, list[Bucket], int]:
    with runtime.phase("map"):
        chunks = np.array_split(np.arange(len(asg)), runtime.workers)
        parts = runtime.map(lambda rows: route_rows(asg, rows, plan.grouping, plan.glb), chunks)
        routed = RoutedBatch(
            np.concatenate([p.group for p in parts]), np.concatenate([p.row for p in parts])
        )
    with runtime.phase("shuffle"):
        buckets = shuffle(routed, plan.grouping.num_groups, asg)
    with runtime.phase("reduce"):
        outs = runtime.map(
            lambda b: reduce_knn_join(b, pv, tables, plan.cache, cfg.k, plan.thetas, audit), buckets
        )
    result = JoinResult.concat([o[0] for o in outs], cfg.k)
    return result, buckets, sum(o[1] for o in outs)


def execute_pgbj(
    R: Dataset,
    S: Dataset,
    cfg: RunConfig,
    pivots: Optional[PivotSet] = None,
    audit: Optional[PruneAudit] = None,
) -> PGBJRun:
    check_k(cfg.k, S)
    runtime = LocalRuntime(cfg.worker_count)
    log.info("PGBJ run config: %s", cfg.to_dict())
    with runtime.phase("pivots"):
        pv = pivots if pivots is not None else select_pivots(R, cfg.selection, cfg.metric)
        if pv.metric is not cfg.metric:
            pv = PivotSet(pv.coords, cfg.metric)
    with runtime.phase("partition"):
        asg, tables = partition_all(R, S, pv, cfg.k, runtime)
    if cfg.spill_dir is not None:
        from pgbj import artifacts

        with runtime.phase("spill"):
            artifacts.write_job1(cfg.spill_dir, pv, asg, tables)
            pv, asg, tables = artifacts.read_job1(cfg.spill_dir)
    with runtime.phase("plan"):
        plan = plan_join(pv, tables, cfg)
    if cfg.spill_dir is not None:
        from pgbj import artifacts

        artifacts.write_plan(cfg.spill_dir, plan)
    result, buckets, pairs = run_job2(pv, asg, tables, plan, cfg, runtime, audit)
    metrics = pgbj_metrics(cfg, pv, tables, plan, buckets, pairs, runtime)
    metrics.predicted_replication = predicted_replication(asg.of(SOURCE_S), plan.glb)
    return PGBJRun(result, metrics, pv, asg, tables, plan.thetas, plan.lb, plan.grouping, plan.glb, buckets)


def pgbj_metrics(cfg, pv, tables, plan, buckets, pairs, runtime) -> RunMetrics:
    num_r, num_s = int(tables.r_count.sum()), int(tables.s_count.sum())
    return RunMetrics(
        engine=Engine.PGBJ.value,
        k=cfg.k,
        num_r=num_r,
        num_s=num_s,
        pairs_computed=pairs,
        partition_pairs_computed=(num_r + num_s) * len(pv),
        shuffle_records_R=sum(len(b.r) for b in buckets),
        shuffle_records_S=sum(len(b.s) for b in buckets),
        num_pivots=len(pv),
        num_groups=plan.grouping.num_groups,
        per_group_load=[b.load for b in buckets],
        group_sizes=plan.grouping.group_counts(tables).tolist(),
        partition_sizes=tables.r_count.tolist(),
        timings=dict(runtime.timings),
    )


def run_pgbj(R: Dataset, S: Dataset, cfg: RunConfig, pivots: Optional[PivotSet] = None):
    run = execute_pgbj(R, S, cfg, pivots)
    return run.result, run.metrics


# -- baselines --------------------------------------------------------------


def _block_reduce(Rb: Dataset, Sb: Dataset, k: int, metric: MetricKind, budget: int = 1 << 16):
    """Local k-best of every r in Rb against Sb (brute force)."""
    chunk = max(1, budget // max(1, len(Sb)))
    ids, ds = [], []
    for a in range(0, len(Rb), chunk):
        d = cdist(Rb.coords[a:a + chunk], Sb.coords, metric)
        i, dd = topk_rows(d, Sb.ids, k)
        ids.append(i)
        ds.append(dd)
    return np.concatenate(ids), np.concatenate(ds)


def run_block_baseline(R: Dataset, S: Dataset, cfg: RunConfig):
    """Random sqrt(N) x sqrt(N) blocking, brute-force blocks, then a merge job."""
    check_k(cfg.k, S)
    runtime = LocalRuntime(cfg.worker_count)
    b = max(1, math.isqrt(cfg.num_groups))
    if b * b != cfg.num_groups:
        log.info("num_groups=%d is not a perfect square; using %d x %d blocks", cfg.num_groups, b, b)
    rng = make_rng(cfg.seed, BLOCK_STREAM)
    with runtime.phase("partition"):
        r_blocks = [R.subset(np.sort(rows)) for rows in np.array_split(rng.permutation(len(R)), b)]
        s_blocks = [S.subset(np.sort(rows)) for rows in np.array_split(rng.permutation(len(S)), b)]
    tasks = [(i, j) for i in range(len(r_blocks)) for j in range(len(s_blocks))]
    with runtime.phase("reduce"):
        local = runtime.map(lambda t: _block_reduce(r_blocks[t[0]], s_blocks[t[1]], cfg.k, cfg.metric), tasks)
    merge_records = sum(l[0].size for l in local)
    with runtime.phase("merge"):
        fragments = []
        for i, Rb in enumerate(r_blocks):
            parts = [local[t] for t, (bi, _) in enumerate(tasks) if bi == i]
            all_id = np.hstack([p[0] for p in parts])
            all_d = np.hstack([p[1] for p in parts])
            order = np.lexsort((all_id, all_d), axis=1)[:, :cfg.k]
            fragments.append(
                JoinResult(Rb.ids, np.take_along_axis(all_id, order, 1), np.take_along_axis(all_d, order, 1))
            )
    result = JoinResult.concat(fragments, cfg.k)
    metrics = RunMetrics(
        engine=Engine.BLOCK_BASELINE.value,
        k=cfg.k,
        num_r=len(R),
        num_s=len(S),
        pairs_computed=len(R) * len(S),
        shuffle_records_R=b * len(R),
        shuffle_records_S=b * len(S),
        merge_records=merge_records,
        num_groups=len(tasks),
        blocks_per_side=b,
        per_group_load=[len(r_blocks[i]) + len(s_blocks[j]) for i, j in tasks],
        group_sizes=[len(r_blocks[i]) for i, _ in tasks],
        timings=dict(runtime.timings),
    )
    return result, metrics


def run_oracle(R: Dataset, S: Dataset, cfg: RunConfig):
    runtime = LocalRuntime(1)
    with runtime.phase("join"):
        result = brute_force_knn_join(R, S, cfg.k, cfg.metric)
    metrics = RunMetrics(
        engine=Engine.ORACLE.value,
        k=cfg.k,
        num_r=len(R),
        num_s=len(S),
        pairs_computed=len(R) * len(S),
        timings=dict(runtime.timings),
    )
    return result, metrics


def run(R: Dataset, S: Dataset, cfg: RunConfig, pivots: Optional[PivotSet] = None):
    if cfg.engine is Engine.PGBJ:
        return run_pgbj(R, S, cfg, pivots)
    if cfg.engine is Engine.BLOCK_BASELINE:
        return run_block_baseline(R, S, cfg)
    return run_oracle(R, S, cfg)
