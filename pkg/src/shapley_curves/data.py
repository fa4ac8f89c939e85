"""Core value types: datasets, variable subsets, evaluation grids, curve estimates.

Variables are indexed from 0 in the Python API. A subset ``s`` of the ``d``
variables is stored as a bitmask with bit ``j`` set iff variable ``j`` is in
``s``; all enumerations run in ascending bitmask order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

MAX_DIM = 25


class ShapleyCurvesError(Exception):
    """Base class for package errors."""


class ConfigurationError(ShapleyCurvesError, ValueError):
    pass


class DataError(ShapleyCurvesError, ValueError):
    pass


class EstimationError(ShapleyCurvesError):
    """A fit could not be evaluated; ``point`` carries the offending query."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = None if point is None else np.asarray(point, dtype=float)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """A sample ``{(X_i, Y_i)}``: ``x`` is ``n x d``, ``y`` has length ``n``."""

    x: np.ndarray
    y: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError(f"x must be a 2-D array, got shape {x.shape}")
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if y.shape[0] != x.shape[0]:
            raise DataError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if x.shape[0] < 2:
            raise DataError("a dataset needs at least 2 observations")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise DataError("non-finite values in dataset")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} names for {x.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError(f"column names must be unique: {names}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def equals(self, other: "Dataset") -> bool:
        return (
            self.names == other.names
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


@dataclass(frozen=True, order=True)
class SubsetMask:
    bits: int
    d: int

    def __post_init__(self):
        if not 0 <= self.d <= MAX_DIM:
            raise ConfigurationError(f"d={self.d} outside [0, {MAX_DIM}]")
        if not 0 <= self.bits < (1 << self.d):
            raise ConfigurationError(f"mask {self.bits} invalid for d={self.d}")

    @classmethod
    def from_indices(cls, indices: Sequence[int], d: int) -> "SubsetMask":
        bits = 0
        for j in indices:
            if not 0 <= j < d:
                raise ConfigurationError(f"variable index {j} outside [0, {d})")
            bits |= 1 << j
        return cls(bits, d)

    @property
    def indices(self) -> tuple:
        return tuple(j for j in range(self.d) if self.bits >> j & 1)

    @property
    def complement(self) -> tuple:
        return tuple(j for j in range(self.d) if not self.bits >> j & 1)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __contains__(self, j: int) -> bool:
        return bool(self.bits >> j & 1)

    def with_(self, j: int) -> "SubsetMask":
        return SubsetMask(self.bits | (1 << j), self.d)

    def __repr__(self):
        return "{" + ",".join(str(j) for j in self.indices) + "}"


def check_dim(d: int) -> None:
    if not 1 <= d <= MAX_DIM:
        raise ConfigurationError(f"dimension d={d} outside [1, {MAX_DIM}]")


def all_subsets(d: int) -> list:
    check_dim(d)
    return [SubsetMask(bits, d) for bits in range(1 << d)]


def subsets_excluding(j: int, d: int) -> list:
    """All subsets of the variables other than ``j``, ascending by bitmask."""
    check_dim(d)
    if not 0 <= j < d:
        raise ConfigurationError(f"variable index {j} outside [0, {d})")
    return [SubsetMask(bits, d) for bits in range(1 << d) if not bits >> j & 1]


def slice_columns(data: Dataset, s: SubsetMask) -> Dataset:
    """Restrict ``data`` to the columns in ``s``; for ``s`` empty, ``x`` is ``n x 0``."""
    if s.d != data.d:
        raise ConfigurationError(f"mask over d={s.d} used on data with d={data.d}")
    idx = list(s.indices)
    out = object.__new__(Dataset)
    object.__setattr__(out, "x", _frozen(data.x[:, idx].reshape(data.n, len(idx))))
    object.__setattr__(out, "y", data.y)
    object.__setattr__(out, "names", tuple(data.names[j] for j in idx))
    return out


def as_points(points, d: int) -> np.ndarray:
    """Validate evaluation points into a finite ``m x d`` float array."""
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p.reshape(1, -1) if p.size == d else p.reshape(-1, 1)
    if p.ndim != 2 or p.shape[1] != d:
        raise ConfigurationError(f"points must have {d} columns, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ConfigurationError("evaluation points must be finite")
    return p


def subset_rows(x_s, k: int) -> np.ndarray:
    """Rows of subset coordinates as ``(m, k)``; for ``k = 0`` an ``(m, 0)`` array."""
    a = np.asarray(x_s, dtype=float)
    if k == 0:
        return np.empty((a.shape[0] if a.ndim == 2 else 1, 0))
    return a.reshape(-1, k)


@dataclass(frozen=True)
class Grid:
    """Cartesian evaluation lattice; one strictly increasing axis per variable."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.axes)
        for k, a in enumerate(axes):
            if a.size == 0 or np.any(np.diff(a) <= 0):
                raise ConfigurationError(f"grid axis {k} must be non-empty and strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, lo, hi, size) -> "Grid":
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        sizes = np.broadcast_to(size, lo.shape)
        return cls(tuple(np.linspace(a, b, int(k)) for a, b, k in zip(lo, hi, sizes)))

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    def __iter__(self) -> Iterator[np.ndarray]:
        for p in itertools.product(*self.axes):
            yield np.array(p)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


@dataclass
class CurveEstimate:
    """Shapley curve values ``values[i, j]`` for variable ``j`` at ``points[i]``.

    ``failed`` marks points where some component could not be evaluated; their
    values are NaN. CI bounds, when present, are NaN where unavailable.
    """

    points: np.ndarray
    values: np.ndarray
    method: str
    ci_lower: Optional[np.ndarray] = None
    ci_upper: Optional[np.ndarray] = None
    alpha: Optional[float] = None
    failed: np.ndarray = field(default=None)
    variables: tuple = ()

    def __post_init__(self):
        if self.failed is None:
            self.failed = ~np.all(np.isfinite(self.values), axis=1)
        if not self.variables:
            self.variables = tuple(range(self.values.shape[1]))
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha={self.alpha} outside (0, 1)")

    @property
    def has_ci(self) -> bool:
        return self.ci_lower is not None and self.ci_upper is not None

    def column(self, j: int) -> np.ndarray:
        return self.values[:, self.variables.index(j)]
