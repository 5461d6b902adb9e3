"""Command line entry point: ``pgbj <verb> [options]``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from pathlib import Path

from pgbj import artifacts
from pgbj.datagen import SyntheticKind, expand_dataset, generate_synthetic
from pgbj.engine import Engine, RunConfig, plan_join, run, run_job2, pgbj_metrics
from pgbj.grouping import GroupingStrategy, predicted_replication
from pgbj.metric import Dataset, MetricKind
from pgbj.oracle import check_k
from pgbj.partitioner import SOURCE_S, partition_all
from pgbj.pivots import SelectionConfig, Strategy, select_pivots
from pgbj.runtime import LocalRuntime

log = logging.getLogger("pgbj")


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _words(text: str) -> list[str]:
    return [t.strip().upper() for t in text.split(",") if t.strip()]


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", default="RANDOM", type=str.upper, choices=[s.value for s in Strategy])
    p.add_argument("--num-pivots", type=int, default=16)
    p.add_argument("--num-trials", type=int, default=5)
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--max-iterations", type=int, default=20)


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--metric", default="L2", type=str.upper, choices=[m.value for m in MetricKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--worker-count", type=int, default=1)


def _add_inputs(p: argparse.ArgumentParser, need_r: bool = True) -> None:
    p.add_argument("--r", type=Path, required=need_r, help="outer dataset CSV")
    p.add_argument("--s", type=Path, help="inner dataset CSV (default: self-join on R)")


def _selection(a) -> SelectionConfig:
    return SelectionConfig(
        strategy=a.strategy,
        num_pivots=a.num_pivots,
        num_trials=a.num_trials,
        sample_size=a.sample_size,
        max_iterations=a.max_iterations,
        seed=a.seed,
    )


def _config(a, engine: str = "PGBJ") -> RunConfig:
    return RunConfig(
        k=a.k,
        metric=a.metric,
        selection=_selection(a) if hasattr(a, "strategy") else SelectionConfig(seed=a.seed),
        num_groups=getattr(a, "num_groups", 1),
        grouping=getattr(a, "grouping", "GEOMETRIC"),
        engine=getattr(a, "engine", engine),
        worker_count=a.worker_count,
        seed=a.seed,
        theta_slack=getattr(a, "theta_slack", 0.0),
        spill_dir=getattr(a, "spill_dir", None),
    )


def _load(a) -> tuple[Dataset, Dataset]:
    R = artifacts.parse_points(a.r, "R")
    S = artifacts.parse_points(a.s, "S") if a.s else Dataset("S", R.ids, R.coords)
    return R, S


def _emit(result, metrics, a, cfg: RunConfig) -> None:
    if a.out:
        artifacts.write_result(result, a.out)
    if a.metrics:
        artifacts.write_metrics(metrics, a.metrics, cfg.to_dict())
    summary = {k: v for k, v in metrics.to_dict().items() if not isinstance(v, list)}
    summary["config"] = cfg.to_dict()
    print(json.dumps(summary, indent=2))


def cmd_generate(a) -> None:
    ds = generate_synthetic(a.kind, a.dim, a.count, a.clusters, a.seed)
    artifacts.write_points(ds, a.out)
    log.info("wrote %d %s points (n=%d) to %s", len(ds), a.kind, a.dim, a.out)


def cmd_expand(a) -> None:
    ds = artifacts.parse_points(a.input, "O", has_ids=a.ids)
    out = expand_dataset(ds, a.factor)
    artifacts.write_points(out, a.out)
    log.info("expanded %d -> %d points", len(ds), len(out))


def cmd_pivots(a) -> None:
    R = artifacts.parse_points(a.r, "R")
    cfg = _selection(a)
    log.info("pivot selection config: %s", cfg)
    pv = select_pivots(R, cfg, MetricKind.parse(a.metric))
    artifacts.write_pivots(pv, a.out)
    log.info("wrote %d pivots to %s", len(pv), a.out)


def cmd_partition(a) -> None:
    R, S = _load(a)
    check_k(a.k, S)
    metric = MetricKind.parse(a.metric)
    pv = artifacts.read_pivots(a.pivots, metric)
    asg, tables = partition_all(R, S, pv, a.k, LocalRuntime(a.worker_count))
    artifacts.write_job1(a.artifacts, pv, asg, tables)
    log.info("job 1: %d records, %d partitions -> %s", len(asg), len(pv), a.artifacts)


def cmd_group(a) -> None:
    pv, asg, tables = artifacts.read_job1(a.artifacts)
    cfg = RunConfig(k=tables.k, metric=pv.metric, num_groups=a.num_groups, grouping=a.grouping,
                    theta_slack=a.theta_slack)
    plan = plan_join(pv, tables, cfg)
    artifacts.write_plan(a.artifacts, plan)
    rp = predicted_replication(asg.of(SOURCE_S), plan.glb)
    log.info("grouping: %d groups, predicted S replicas %d", plan.grouping.num_groups, rp)
    print(json.dumps({"num_groups": plan.grouping.num_groups, "predicted_replication": rp,
                      "group_members": plan.grouping.members}))


def cmd_join(a) -> None:
    if a.artifacts:
        _join_from_artifacts(a)
        return
    if a.k is None:
        a.k = 10
    R, S = _load(a)
    cfg = _config(a)
    log.info("resolved config: %s", cfg.to_dict())
    pivots = artifacts.read_pivots(a.pivots, cfg.metric) if a.pivots else None
    result, metrics = run(R, S, cfg, pivots)
    _emit(result, metrics, a, cfg)


def _join_from_artifacts(a) -> None:
    pv, asg, tables = artifacts.read_job1(a.artifacts)
    cfg = RunConfig(k=tables.k, metric=pv.metric, num_groups=a.num_groups, grouping=a.grouping,
                    worker_count=a.worker_count, theta_slack=a.theta_slack)
    if a.k is not None and a.k != tables.k:
        log.warning("--k=%d ignored: job-1 artifacts were built for k=%d", a.k, tables.k)
    log.info("resolved config: %s", cfg.to_dict())
    if (Path(a.artifacts) / artifacts.PLAN_FILE).exists():
        plan = artifacts.read_plan(a.artifacts, pv)
    else:
        plan = plan_join(pv, tables, cfg)
    runtime = LocalRuntime(cfg.worker_count)
    result, buckets, pairs = run_job2(pv, asg, tables, plan, cfg, runtime)
    metrics = pgbj_metrics(cfg, pv, tables, plan, buckets, pairs, runtime)
    metrics.predicted_replication = predicted_replication(asg.of(SOURCE_S), plan.glb)
    _emit(result, metrics, a, cfg)


def cmd_oracle(a) -> None:
    R, S = _load(a)
    cfg = _config(a, "ORACLE")
    cfg.engine = Engine.ORACLE
    result, metrics = run(R, S, cfg)
    _emit(result, metrics, a, cfg)


BENCH_FIELDS = [
    "engine", "strategy", "grouping", "num_pivots", "num_groups", "k", "metric",
    "pairs_computed", "selectivity", "shuffle_records_R", "shuffle_records_S",
    "avg_replication_alpha", "merge_records", "predicted_replication",
    "group_size_min", "group_size_max", "group_size_avg", "group_size_dev",
    "partition_size_min", "partition_size_max", "partition_size_avg", "partition_size_dev",
    "wall_clock_s",
]


def cmd_bench(a) -> None:
    if a.r:
        R, S = _load(a)
    else:
        R = generate_synthetic(a.kind, a.dim, a.count, a.clusters, a.seed, "R")
        S = Dataset("S", R.ids, R.coords)
    rows = []
    for engine in _words(a.engines):
        combos = itertools.product(a.ks, a.num_pivots, _words(a.strategies), _words(a.groupings))
        if engine != "PGBJ":
            combos = itertools.product(a.ks, [0], ["-"], ["-"])
        for k, m, strategy, grouping in combos:
            cfg = RunConfig(
                k=k, metric=a.metric,
                selection=SelectionConfig(strategy=strategy if engine == "PGBJ" else "RANDOM",
                                          num_pivots=max(m, 1), seed=a.seed),
                num_groups=a.num_groups,
                grouping=grouping if engine == "PGBJ" else "GEOMETRIC",
                engine=engine, worker_count=a.worker_count, seed=a.seed,
            )
            log.info("bench run: %s", cfg.to_dict())
            _, metrics = run(R, S, cfg)
            doc = metrics.to_dict()
            doc.update(strategy=strategy, grouping=grouping, metric=cfg.metric.value,
                       num_pivots=metrics.num_pivots,
                       wall_clock_s=sum(metrics.timings.values()))
            rows.append({f: doc.get(f, "") for f in BENCH_FIELDS})
    out = open(a.out, "w", newline="") if a.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if a.out:
            out.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgbj", description="Exact kNN join via Voronoi partitioning and grouping")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="write a synthetic point cloud")
    p.add_argument("--kind", default="UNIFORM", type=str.upper, choices=[k.value for k in SyntheticKind])
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("expand", help="grow a dataset by the frequency-rank substitution")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--factor", type=int, required=True)
    p.add_argument("--ids", action=argparse.BooleanOptionalAction, default=None,
                   help="whether the first column holds ids (default: detect)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_expand)

    p = sub.add_parser("pivots", help="select pivots from R")
    p.add_argument("--r", type=Path, required=True)
    _add_selection(p)
    p.add_argument("--metric", default="L2", type=str.upper, choices=[m.value for m in MetricKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_pivots)

    p = sub.add_parser("partition", help="job 1: Voronoi assignment and summary tables")
    _add_inputs(p)
    p.add_argument("--pivots", type=Path, required=True)
    _add_run(p)
    p.add_argument("--artifacts", type=Path, required=True, help="output directory for job-1 artifacts")
    p.set_defaults(fn=cmd_partition)

    p = sub.add_parser("group", help="thetas, LB table and grouping from job-1 artifacts")
    p.add_argument("--artifacts", type=Path, required=True)
    p.add_argument("--grouping", default="GEOMETRIC", type=str.upper, choices=[g.value for g in GroupingStrategy])
    p.add_argument("--num-groups", type=int, default=4)
    p.add_argument("--theta-slack", type=float, default=0.0)
    p.set_defaults(fn=cmd_group)

    p = sub.add_parser("join", help="run a kNN join (end to end, or job 2 from artifacts)")
    _add_inputs(p, need_r=False)
    _add_selection(p)
    _add_run(p)
    p.set_defaults(k=None)  # join --artifacts takes k from the job-1 artifacts
    p.add_argument("--engine", default="PGBJ", type=str.upper, choices=[e.value for e in Engine])
    p.add_argument("--grouping", default="GEOMETRIC", type=str.upper, choices=[g.value for g in GroupingStrategy])
    p.add_argument("--num-groups", type=int, default=4)
    p.add_argument("--theta-slack", type=float, default=0.0)
    p.add_argument("--pivots", type=Path, help="use these pivots instead of selecting")
    p.add_argument("--artifacts", type=Path, help="run job 2 from a job-1 artifact directory")
    p.add_argument("--spill-dir", type=Path, help="persist and reload artifacts between the jobs")
    p.add_argument("--out", type=Path)
    p.add_argument("--metrics", type=Path)
    p.set_defaults(fn=cmd_join)

    p = sub.add_parser("oracle", help="brute-force kNN join")
    _add_inputs(p)
    _add_run(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--metrics", type=Path)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("bench", help="sweep k / pivots / strategies and emit a metrics table (CSV)")
    _add_inputs(p, need_r=False)
    p.add_argument("--kind", default="GAUSSIAN_MIXTURE", type=str.upper, choices=[k.value for k in SyntheticKind])
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--count", type=int, default=5000)
    p.add_argument("--clusters", type=int, default=20)
    p.add_argument("--ks", type=_ints, default=[10])
    p.add_argument("--num-pivots", type=_ints, default=[50])
    p.add_argument("--strategies", default="RANDOM")
    p.add_argument("--groupings", default="GEOMETRIC")
    p.add_argument("--engines", default="PGBJ,BLOCK_BASELINE")
    p.add_argument("--num-groups", type=int, default=9)
    p.add_argument("--metric", default="L2", type=str.upper, choices=[m.value for m in MetricKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--worker-count", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if a.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if a.verb == "join" and not a.artifacts and not a.r:
        print("error: join needs --r (or --artifacts)", file=sys.stderr)
        return 2
    try:
        a.fn(a)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
