"""Pivot selection on the master: random, farthest and k-means strategies."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pgbj.metric import DataPoint, Dataset, MetricKind, cdist

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    RANDOM = "RANDOM"
    FARTHEST = "FARTHEST"
    KMEANS = "KMEANS"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        return cls(value.upper())


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one named stream of a run seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream)))


# stream ids handed to make_rng
PIVOT_STREAM = 1
BLOCK_STREAM = 2
DATA_STREAM = 3


@dataclass(frozen=True)
class SelectionConfig:
    strategy: Strategy = Strategy.RANDOM
    num_pivots: int = 16
    num_trials: int = 5
    sample_size: Optional[int] = None
    max_iterations: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if self.num_pivots < 1:
            raise ValueError("num_pivots must be positive")
        if self.num_trials < 1:
            raise ValueError("num_trials must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be positive")

    def resolved_sample_size(self, population: int) -> int:
        if self.sample_size is None:
            return min(population, 10 * self.num_pivots)
        return min(population, self.sample_size)


@dataclass
class PivotSet:
    coords: np.ndarray
    metric: MetricKind = MetricKind.L2

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or len(self.coords) == 0:
            raise ValueError("a pivot set needs at least one pivot")
        self.metric = MetricKind.parse(self.metric)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def pivots(self) -> list[DataPoint]:
        return [DataPoint(i, tuple(c)) for i, c in enumerate(self.coords)]

    def as_dataset(self) -> Dataset:
        return Dataset("P", np.arange(len(self)), self.coords)

    @classmethod
    def from_dataset(cls, ds: Dataset, metric: MetricKind = MetricKind.L2) -> "PivotSet":
        return dedupe(ds.coords, metric)


def dedupe(coords: np.ndarray, metric: MetricKind) -> PivotSet:
    """Drop coordinate duplicates, keeping first occurrences in order."""
    coords = np.asarray(coords, dtype=np.float64)
    _, first = np.unique(coords, axis=0, return_index=True)
    keep = np.sort(first)
    if len(keep) < len(coords):
        log.info("removed %d duplicate pivot(s)", len(coords) - len(keep))
    return PivotSet(coords[keep], metric)


def _check_count(R: Dataset, cfg: SelectionConfig):
    if cfg.num_pivots > len(R):
        raise ValueError(f"cannot select {cfg.num_pivots} pivots from {len(R)} objects")


def _sample(R: Dataset, cfg: SelectionConfig, rng: np.random.Generator) -> np.ndarray:
    size = cfg.resolved_sample_size(len(R))
    if size == 0:
        raise ValueError("empty sample")
    if size < cfg.num_pivots:
        raise ValueError(f"sample of {size} objects is smaller than num_pivots={cfg.num_pivots}")
    if size >= len(R):
        return R.coords
    rows = np.sort(rng.choice(len(R), size=size, replace=False))
    return R.coords[rows]


def pairwise_sum(coords: np.ndarray, metric: MetricKind) -> float:
    d = cdist(coords, coords, metric)
    return float(np.triu(d, 1).sum())


def select_random(R: Dataset, cfg: SelectionConfig, metric: MetricKind = MetricKind.L2) -> PivotSet:
    """Best of ``num_trials`` random subsets by total pairwise distance."""
    _check_count(R, cfg)
    rng = make_rng(cfg.seed, PIVOT_STREAM)
    best_rows, best_score = None, -np.inf
    for _ in range(cfg.num_trials):
        rows = np.sort(rng.choice(len(R), size=cfg.num_pivots, replace=False))
        score = pairwise_sum(R.coords[rows], metric)
        if score > best_score:
            best_rows, best_score = rows, score
    return dedupe(R.coords[best_rows], metric)


def farthest_order(sample: np.ndarray, m: int, first: int, metric: MetricKind) -> list[int]:
    """Indices into ``sample`` chosen by iterated max-sum-of-distances."""
    chosen = [first]
    total = cdist(sample, sample[first:first + 1], metric)[:, 0]
    taken = np.zeros(len(sample), dtype=bool)
    taken[first] = True
    while len(chosen) < m:
        score = np.where(taken, -np.inf, total)
        nxt = int(np.argmax(score))
        chosen.append(nxt)
        taken[nxt] = True
        total = total + cdist(sample, sample[nxt:nxt + 1], metric)[:, 0]
    return chosen


def select_farthest(
    R: Dataset,
    cfg: SelectionConfig,
    metric: MetricKind = MetricKind.L2,
    first: Optional[int] = None,
) -> PivotSet:
    """Farthest selection on a sample of R.

    ``first`` pins the index (within the sample) of the initial pivot;
    otherwise it is drawn from the seeded stream.
    """
    _check_count(R, cfg)
    rng = make_rng(cfg.seed, PIVOT_STREAM)
    sample = _sample(R, cfg, rng)
    if first is None:
        first = int(rng.integers(len(sample)))
    order = farthest_order(sample, cfg.num_pivots, first, metric)
    return dedupe(sample[order], metric)


def lloyd(
    sample: np.ndarray,
    centers: np.ndarray,
    max_iterations: int,
    metric: MetricKind,
) -> np.ndarray:
    centers = centers.copy()
    labels = None
    for _ in range(max_iterations):
        d = cdist(sample, centers, metric)
        new_labels = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=len(centers))
        while (counts == 0).any():
            c = int(np.flatnonzero(counts == 0)[0])
            # farthest point from its own center (in a cluster that can spare it)
            own = d[np.arange(len(sample)), labels]
            own = np.where(counts[labels] > 1, own, -np.inf)
            far = int(np.argmax(own))
            log.info("k-means: empty cluster %d re-seeded on sample point %d", c, far)
            labels[far] = c
            d[far, :] = np.inf
            d[far, c] = 0.0
            counts = np.bincount(labels, minlength=len(centers))
        for c in range(len(centers)):
            centers[c] = sample[labels == c].mean(axis=0)
    return centers


def select_kmeans(R: Dataset, cfg: SelectionConfig, metric: MetricKind = MetricKind.L2) -> PivotSet:
    _check_count(R, cfg)
    rng = make_rng(cfg.seed, PIVOT_STREAM)
    sample = _sample(R, cfg, rng)
    init = np.sort(rng.choice(len(sample), size=cfg.num_pivots, replace=False))
    centers = lloyd(sample, sample[init], cfg.max_iterations, metric)
    return dedupe(centers, metric)


def select_pivots(R: Dataset, cfg: SelectionConfig, metric: MetricKind = MetricKind.L2) -> PivotSet:
    if cfg.strategy is Strategy.RANDOM:
        return select_random(R, cfg, metric)
    if cfg.strategy is Strategy.FARTHEST:
        return select_farthest(R, cfg, metric)
    return select_kmeans(R, cfg, metric)
