"""File formats: point CSV, join results, metrics, and the persisted job artifacts.

Job-1 output (pivots, assignments, summary tables) and the master's plan
(thetas, LB table, grouping) live in one directory so that ``partition``,
``group`` and ``join`` can run as separate invocations.
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path
from typing import Optional

import numpy as np

from pgbj.metric import Dataset, MetricKind
from pgbj.partitioner import SOURCE_NAMES, Assignments, SummaryTables
from pgbj.pivots import PivotSet
from pgbj.results import JoinResult, RunMetrics

_INT = re.compile(r"^\s*\d+\s*$")


class FormatError(ValueError):
    pass


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def parse_points(
    path, name: str = "R", has_ids: Optional[bool] = None, payload: bool = False
) -> Dataset:
    """Read a point CSV.

    Rows are ``id,v1,...,vn`` or ``v1,...,vn``. A first line whose first field
    is not numeric is a header; with a header, an id column is present iff
    the first header field is ``id``. Without one, the first column is taken
    as ids when every first field is a non-negative integer literal and they
    are unique. ``has_ids`` overrides the guess. With ``payload`` the last
    column is an opaque string carried through unchanged.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(n, row) for n, row in enumerate(csv.reader(fh), start=1) if row and any(c.strip() for c in row)]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    header = None
    if not _is_number(rows[0][1][0]):
        header = [c.strip().lower() for c in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise FormatError(f"{path}: header but no data rows")
    payloads = None
    if payload:
        payloads = [row[-1] for _, row in rows]
        rows = [(n, row[:-1]) for n, row in rows]
    if has_ids is None:
        if header is not None:
            has_ids = header[0] == "id"
        else:
            firsts = [row[0] for _, row in rows]
            has_ids = (
                all(_INT.match(t) for t in firsts)
                and len(rows[0][1]) > 1
                and len({int(t) for t in firsts}) == len(firsts)
            )
    width = len(rows[0][1])
    ids, coords = [], []
    seen: dict[int, int] = {}
    for lineno, row in rows:
        if len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            vals = [float(t) for t in row]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
        if has_ids:
            if not _INT.match(row[0]):
                raise FormatError(f"{path}:{lineno}: id {row[0]!r} is not a non-negative integer")
            pid = int(row[0])
            if pid in seen:
                raise FormatError(f"{path}:{lineno}: duplicate id {pid} (first on line {seen[pid]})")
            seen[pid] = lineno
            ids.append(pid)
            vals = vals[1:]
        if not vals:
            raise FormatError(f"{path}:{lineno}: no coordinates")
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}:{lineno}: non-finite coordinate")
        coords.append(vals)
    if not has_ids:
        ids = list(range(len(coords)))
    return Dataset(name, ids, coords, payloads)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_points(ds: Dataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["id"] + [f"x{c}" for c in range(ds.dim)]
        if ds.payloads is not None:
            head.append("payload")
        w.writerow(head)
        for row in range(len(ds)):
            line = [str(int(ds.ids[row]))] + [_fmt(v) for v in ds.coords[row]]
            if ds.payloads is not None:
                line.append(ds.payloads[row])
            w.writerow(line)


def write_pivots(pv: PivotSet, path) -> None:
    write_points(pv.as_dataset(), path)


def read_pivots(path, metric: MetricKind = MetricKind.L2) -> PivotSet:
    return PivotSet.from_dataset(parse_points(path, "P"), metric)


def write_result(result: JoinResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for r, ids, ds in zip(result.r_ids, result.nn_ids, result.nn_dists):
            for rank, (s, d) in enumerate(zip(ids, ds), start=1):
                fh.write(f"{r},{rank},{s},{d:.12g}\n")


def read_result(path) -> JoinResult:
    rows: dict[int, list[tuple[int, int, float]]] = {}
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                r, rank, s, d = line.strip().split(",")
                rows.setdefault(int(r), []).append((int(rank), int(s), float(d)))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed result line") from None
    r_ids = sorted(rows)
    k = len(rows[r_ids[0]]) if r_ids else 0
    nn_ids = np.empty((len(r_ids), k), dtype=np.int64)
    nn_d = np.empty((len(r_ids), k))
    for row, r in enumerate(r_ids):
        entries = sorted(rows[r])
        if [e[0] for e in entries] != list(range(1, k + 1)):
            raise FormatError(f"{path}: ranks for r={r} are not 1..{k}")
        nn_ids[row] = [e[1] for e in entries]
        nn_d[row] = [e[2] for e in entries]
    return JoinResult(np.array(r_ids, dtype=np.int64), nn_ids, nn_d)


def write_metrics(metrics: RunMetrics, path, config: Optional[dict] = None) -> None:
    doc = metrics.to_dict()
    if config:
        doc.update({f"config_{k}": v for k, v in config.items()})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def read_metrics(path) -> dict:
    return json.loads(Path(path).read_text())


# -- job artifacts ----------------------------------------------------------

PIVOTS_FILE = "pivots.csv"
ASSIGNMENTS_FILE = "assignments.csv"
SUMMARY_FILE = "summary.jsonl"
PLAN_FILE = "plan.jsonl"


def _jsonl(path: Path, records) -> None:
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with path.open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_assignments(asg: Assignments, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "id", "partition", "dist_to_pivot"] + [f"x{c}" for c in range(asg.coords.shape[1])])
        for row in range(len(asg)):
            w.writerow(
                [SOURCE_NAMES[asg.source[row]], int(asg.ids[row]), int(asg.partition[row]), _fmt(asg.dist[row])]
                + [_fmt(v) for v in asg.coords[row]]
            )


def read_assignments(path) -> Assignments:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = list(reader)
    src = np.array([SOURCE_NAMES.index(r[0]) for r in rows], dtype=np.int8)
    return Assignments(
        src,
        np.array([int(r[1]) for r in rows], dtype=np.int64),
        np.array([int(r[2]) for r in rows], dtype=np.int64),
        np.array([float(r[3]) for r in rows]),
        np.array([[float(v) for v in r[4:]] for r in rows]),
    )


def write_summary(tables: SummaryTables, path, metric: MetricKind) -> None:
    recs = [{"table": "meta", "k": tables.k, "num_partitions": tables.num_partitions, "metric": metric.value}]
    for i in range(tables.num_partitions):
        recs.append({
            "table": "T_R", "partition": i, "count": int(tables.r_count[i]),
            "lower": float(tables.r_lower[i]), "upper": float(tables.r_upper[i]),
        })
    for j in range(tables.num_partitions):
        recs.append({
            "table": "T_S", "partition": j, "count": int(tables.s_count[j]),
            "lower": float(tables.s_lower[j]), "upper": float(tables.s_upper[j]),
            "knn_dists": [float(v) for v in tables.s_knn[j]],
        })
    _jsonl(Path(path), recs)


def read_summary(path) -> tuple[SummaryTables, MetricKind]:
    recs = _read_jsonl(Path(path))
    meta = recs[0]
    t = SummaryTables.empty(meta["num_partitions"], meta["k"])
    for rec in recs[1:]:
        i = rec["partition"]
        if rec["table"] == "T_R":
            t.r_count[i], t.r_lower[i], t.r_upper[i] = rec["count"], rec["lower"], rec["upper"]
        else:
            t.s_count[i], t.s_lower[i], t.s_upper[i] = rec["count"], rec["lower"], rec["upper"]
            t.s_knn[i] = np.array(rec["knn_dists"], dtype=np.float64)
    return t, MetricKind.parse(meta["metric"])


def write_job1(directory, pv: PivotSet, asg: Assignments, tables: SummaryTables) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_pivots(pv, d / PIVOTS_FILE)
    write_assignments(asg, d / ASSIGNMENTS_FILE)
    write_summary(tables, d / SUMMARY_FILE, pv.metric)


def read_job1(directory) -> tuple[PivotSet, Assignments, SummaryTables]:
    d = Path(directory)
    tables, metric = read_summary(d / SUMMARY_FILE)
    pv = PivotSet(parse_points(d / PIVOTS_FILE, "P").coords, metric)
    return pv, read_assignments(d / ASSIGNMENTS_FILE), tables


def write_plan(directory, plan) -> None:
    g = plan.grouping
    recs = [{"table": "meta", "num_groups": g.num_groups, "num_partitions": len(plan.thetas)}]
    recs += [{"table": "theta", "partition": i, "theta": float(t)} for i, t in enumerate(plan.thetas)]
    recs += [{"table": "lb", "s_partition": j, "row": [float(v) for v in row]} for j, row in enumerate(plan.lb)]
    recs += [{"table": "group", "group": gi, "members": cells} for gi, cells in enumerate(g.members)]
    recs += [{"table": "glb", "s_partition": j, "row": [float(v) for v in row]} for j, row in enumerate(plan.glb)]
    _jsonl(Path(directory) / PLAN_FILE, recs)


def read_plan(directory, pv: PivotSet):
    from pgbj.bounds import PivotDistanceCache
    from pgbj.engine import JoinPlan
    from pgbj.grouping import Grouping

    recs = _read_jsonl(Path(directory) / PLAN_FILE)
    meta = recs[0]
    m = meta["num_partitions"]
    thetas = np.full(m, math.inf)
    lb = np.full((m, m), math.inf)
    glb = np.full((m, meta["num_groups"]), math.inf)
    members: list[list[int]] = [[] for _ in range(meta["num_groups"])]
    for rec in recs[1:]:
        kind = rec["table"]
        if kind == "theta":
            thetas[rec["partition"]] = rec["theta"]
        elif kind == "lb":
            lb[rec["s_partition"]] = rec["row"]
        elif kind == "group":
            members[rec["group"]] = rec["members"]
        elif kind == "glb":
            glb[rec["s_partition"]] = rec["row"]
    return JoinPlan(PivotDistanceCache(pv), thetas, lb, Grouping.from_members(members, m), glb)
