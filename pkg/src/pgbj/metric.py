"""Points, datasets and the three Minkowski metrics.

Every distance in the package goes through :func:`pairwise` or :func:`cdist`.
Both accumulate coordinates one at a time in index order, so the value for a
given pair of vectors is bit-identical no matter which array shape it was
computed in. The oracle, the PGBJ reducers and the block baseline rely on this
to agree exactly under the shared tie-break.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class MetricKind(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "LINF"

    @classmethod
    def parse(cls, value: "str | MetricKind") -> "MetricKind":
        if isinstance(value, MetricKind):
            return value
        try:
            return cls(value.upper())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}; expected one of L1, L2, LINF") from None


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DataPoint:
    id: int
    coords: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if self.id < 0:
            raise ValueError(f"point id must be non-negative, got {self.id}")
        if not self.coords:
            raise ValueError(f"point {self.id} has no coordinates")

    @property
    def dim(self) -> int:
        return len(self.coords)


@dataclass
class Dataset:
    """A named point set stored column-wise.

    ``ids`` is an int64 vector and ``coords`` a float64 matrix with one row
    per point. ``payloads`` optionally carries an opaque string per point.
    """

    name: str
    ids: np.ndarray
    coords: np.ndarray
    payloads: Optional[list[str]] = field(default=None, repr=False)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2:
            raise ValueError(f"dataset {self.name}: coords must be a 2-D array")
        if len(self.ids) == 0:
            raise ValueError(f"dataset {self.name} is empty")
        if self.coords.shape[0] != len(self.ids):
            raise ValueError(f"dataset {self.name}: {len(self.ids)} ids for {self.coords.shape[0]} rows")
        if self.coords.shape[1] < 1:
            raise ValueError(f"dataset {self.name}: dimensionality must be >= 1")
        if (self.ids < 0).any():
            raise ValueError(f"dataset {self.name}: ids must be non-negative")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError(f"dataset {self.name}: duplicate ids")
        if self.payloads is not None and len(self.payloads) != len(self.ids):
            raise ValueError(f"dataset {self.name}: payload count does not match point count")

    @classmethod
    def from_points(cls, name: str, points: Sequence[DataPoint]) -> "Dataset":
        if not points:
            raise ValueError(f"dataset {name} is empty")
        dims = {p.dim for p in points}
        if len(dims) != 1:
            raise ValueError(f"dataset {name}: mixed dimensionality {sorted(dims)}")
        return cls(name, [p.id for p in points], [p.coords for p in points])

    @classmethod
    def from_array(cls, name: str, coords, ids=None) -> "Dataset":
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords[:, None]
        if ids is None:
            ids = np.arange(len(coords), dtype=np.int64)
        return cls(name, ids, coords)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def point(self, row: int) -> DataPoint:
        return DataPoint(int(self.ids[row]), tuple(self.coords[row]))

    def points(self) -> list[DataPoint]:
        return [self.point(i) for i in range(len(self))]

    def subset(self, rows, name: Optional[str] = None) -> "Dataset":
        rows = np.asarray(rows)
        payloads = None if self.payloads is None else [self.payloads[i] for i in rows]
        return Dataset(name or self.name, self.ids[rows], self.coords[rows], payloads)


def _accumulate(diff_columns, metric: MetricKind):
    """Fold per-coordinate differences left to right."""
    acc = None
    for d in diff_columns:
        if metric is MetricKind.L2:
            term = d * d
        else:
            term = np.abs(d)
        if acc is None:
            acc = term
        elif metric is MetricKind.LINF:
            acc = np.maximum(acc, term)
        else:
            acc = acc + term
    return np.sqrt(acc) if metric is MetricKind.L2 else acc


def pairwise(a: np.ndarray, b: np.ndarray, metric: MetricKind = MetricKind.L2) -> np.ndarray:
    """Row-aligned distances: ``out[i] = |a[i], b[i]|`` (either side may broadcast)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimensionality mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return _accumulate((a[..., c] - b[..., c] for c in range(a.shape[-1])), MetricKind.parse(metric))


def cdist(a: np.ndarray, b: np.ndarray, metric: MetricKind = MetricKind.L2) -> np.ndarray:
    """Full ``len(a) x len(b)`` distance matrix."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimensionality mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    metric = MetricKind.parse(metric)
    # same fold as _accumulate, with preallocated buffers
    acc = np.empty((len(a), len(b)))
    tmp = np.empty_like(acc)
    at, bt = np.ascontiguousarray(a.T), np.ascontiguousarray(b.T)
    for c in range(a.shape[1]):
        dst = acc if c == 0 else tmp
        np.subtract(at[c][:, None], bt[c][None, :], out=dst)
        if metric is MetricKind.L2:
            np.multiply(dst, dst, out=dst)
        else:
            np.abs(dst, out=dst)
        if c == 0:
            continue
        if metric is MetricKind.LINF:
            np.maximum(acc, tmp, out=acc)
        else:
            np.add(acc, tmp, out=acc)
    if metric is MetricKind.L2:
        np.sqrt(acc, out=acc)
    return acc


def distance(a: DataPoint, b: DataPoint, m: MetricKind = MetricKind.L2) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(
            f"dimensionality mismatch between point {a.id} (n={a.dim}) and point {b.id} (n={b.dim})"
        )
    return float(pairwise(np.array(a.coords), np.array(b.coords), m))
