"""Brute-force kNN join: scan all of S for every r. No pruning, ever."""

from __future__ import annotations

import numpy as np

from pgbj.metric import Dataset, MetricKind, cdist
from pgbj.results import JoinResult


def check_k(k: int, S: Dataset) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(S):
        raise ValueError(
            f"k={k} exceeds |S|={len(S)}: the kNN join would degrade to the cross join"
        )


def brute_force_knn_join(
    R: Dataset, S: Dataset, k: int, m: MetricKind = MetricKind.L2, chunk: int = 256
) -> JoinResult:
    check_k(k, S)
    m = MetricKind.parse(m)
    nn_ids = np.empty((len(R), k), dtype=np.int64)
    nn_d = np.empty((len(R), k))
    for a in range(0, len(R), chunk):
        d = cdist(R.coords[a:a + chunk], S.coords, m)
        for row in range(len(d)):
            order = np.lexsort((S.ids, d[row]))[:k]
            nn_ids[a + row] = S.ids[order]
            nn_d[a + row] = d[row, order]
    return JoinResult(R.ids.copy(), nn_ids, nn_d)
