"""Synthetic point clouds and the frequency-rank dataset expansion."""

from __future__ import annotations

import enum

import numpy as np

from pgbj.metric import Dataset
from pgbj.pivots import DATA_STREAM, make_rng

CLUSTER_STD = 0.02


class SyntheticKind(str, enum.Enum):
    UNIFORM = "UNIFORM"
    GAUSSIAN_MIXTURE = "GAUSSIAN_MIXTURE"

    @classmethod
    def parse(cls, value: "str | SyntheticKind") -> "SyntheticKind":
        if isinstance(value, SyntheticKind):
            return value
        return cls(value.upper())


def generate_synthetic(
    kind: "SyntheticKind | str",
    n: int,
    count: int,
    clusters: int = 10,
    seed: int = 0,
    name: str = "R",
) -> Dataset:
    """Uniform points in [0, 1]^n, or a Gaussian mixture with centers drawn from [0, 1]^n."""
    kind = SyntheticKind.parse(kind)
    if n < 1 or count < 1 or clusters < 1:
        raise ValueError("n, count and clusters must be positive")
    rng = make_rng(seed, DATA_STREAM)
    if kind is SyntheticKind.UNIFORM:
        coords = rng.random((count, n))
    else:
        centers = rng.random((clusters, n))
        labels = rng.integers(clusters, size=count)
        coords = centers[labels] + rng.normal(0.0, CLUSTER_STD, size=(count, n))
    return Dataset(name, np.arange(count), coords)


def rank_lists(coords: np.ndarray) -> list[np.ndarray]:
    """Per dimension: distinct values ordered by ascending frequency, then by value."""
    out = []
    for col in coords.T:
        values, counts = np.unique(col, return_counts=True)
        out.append(values[np.lexsort((values, counts))])
    return out


def expand_dataset(O: Dataset, t: int) -> Dataset:
    """Grow O to ``t * |O|`` points with the same per-dimension value distribution.

    Copy c of object o takes, in every dimension, the value c places after
    o's value in that dimension's frequency-ranked list (the last value stays
    put). New ids continue after the largest existing id, copy by copy, in
    ascending order of the original ids.
    """
    if t < 1:
        raise ValueError("expansion factor must be >= 1")
    if t == 1:
        return Dataset(O.name, O.ids.copy(), O.coords.copy(), O.payloads)
    ranked = rank_lists(O.coords)
    order = np.argsort(O.ids, kind="stable")
    base = O.coords[order]
    pos = np.empty(base.shape, dtype=np.int64)
    for d, lst in enumerate(ranked):
        by_value = np.argsort(lst)
        pos[:, d] = by_value[np.searchsorted(lst[by_value], base[:, d])]
    copies = []
    for c in range(1, t):
        new = np.empty_like(base)
        for d, lst in enumerate(ranked):
            new[:, d] = lst[np.minimum(pos[:, d] + c, len(lst) - 1)]
        copies.append(new)
    start = int(O.ids.max()) + 1
    new_ids = np.arange(start, start + (t - 1) * len(O))
    payloads = None
    if O.payloads is not None:
        payloads = list(O.payloads) + [O.payloads[i] for _ in range(1, t) for i in order]
    return Dataset(
        O.name,
        np.concatenate([O.ids, new_ids]),
        np.concatenate([O.coords] + copies),
        payloads,
    )
