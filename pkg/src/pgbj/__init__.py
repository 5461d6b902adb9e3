"""Exact kNN join over Voronoi pivot partitions on a simulated MapReduce runtime."""

from pgbj.metric import DataPoint, Dataset, MetricKind, distance
from pgbj.pivots import PivotSet, SelectionConfig, Strategy, select_pivots
from pgbj.partitioner import Assignments, SummaryTables, assign, partition_all
from pgbj.grouping import Grouping, GroupingStrategy
from pgbj.engine import (
    Engine,
    JoinResult,
    RunConfig,
    RunMetrics,
    run_block_baseline,
    run_pgbj,
)
from pgbj.oracle import brute_force_knn_join

__all__ = [
    "Assignments",
    "DataPoint",
    "Dataset",
    "Engine",
    "Grouping",
    "GroupingStrategy",
    "JoinResult",
    "MetricKind",
    "PivotSet",
    "RunConfig",
    "RunMetrics",
    "SelectionConfig",
    "Strategy",
    "SummaryTables",
    "assign",
    "brute_force_knn_join",
    "distance",
    "partition_all",
    "run_block_baseline",
    "run_pgbj",
    "select_pivots",
]

__version__ = "0.1.0"
