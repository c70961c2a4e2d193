"""Points, axis-aligned boxes and exact integer distance primitives.

All distances are squared Euclidean distances computed in exact integer
arithmetic. Scalar helpers work on Python ints (arbitrary precision), the
vectorised helpers fall back to object arrays when a uint64 accumulator
could overflow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Point",
    "Aabb",
    "PointSet",
    "Relation",
    "empty_box",
    "is_empty",
    "sq_dist",
    "min_sq_dist_to_box",
    "box_relate",
    "box_of",
    "box_merge",
    "box_extend",
    "box_contains_point",
    "box_of_array",
    "sq_dists",
    "INT64_MAX",
    "COORD_LIMIT",
]

INT64_MAX = (1 << 63) - 1
# |coordinate| bound so that differences never overflow int64
COORD_LIMIT = 1 << 62
_SAFE_DIFF = 1 << 31


class Point(NamedTuple):
    coords: tuple
    id: int = -1

    @property
    def dims(self) -> int:
        return len(self.coords)


class Aabb(NamedTuple):
    """Closed box given by its lower-left and upper-right corners."""

    lo: tuple
    hi: tuple

    @property
    def dims(self) -> int:
        return len(self.lo)

    def is_empty(self) -> bool:
        return is_empty(self)


class Relation(enum.Enum):
    DISJOINT = 0
    INTERSECTS = 1
    A_CONTAINS_B = 2


_EMPTY_CACHE: dict[int, Aabb] = {}


def empty_box(dims: int) -> Aabb:
    """The empty-box sentinel: lo = +max, hi = -max in every dimension."""
    box = _EMPTY_CACHE.get(dims)
    if box is None:
        box = Aabb((INT64_MAX,) * dims, (-INT64_MAX,) * dims)
        _EMPTY_CACHE[dims] = box
    return box


def is_empty(box: Aabb) -> bool:
    return box.lo[0] > box.hi[0]


def _coords(p) -> tuple:
    if isinstance(p, Point):
        return p.coords
    return tuple(p)


def sq_dist(p, q) -> int:
    a, b = _coords(p), _coords(q)
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    s = 0
    for x, y in zip(a, b):
        d = int(x) - int(y)
        s += d * d
    return s


def min_sq_dist_to_box(p, box: Aabb) -> int:
    if is_empty(box):
        raise ValueError("distance to an empty box is undefined")
    a = _coords(p)
    if len(a) != len(box.lo):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(box.lo)}")
    s = 0
    for x, lo, hi in zip(a, box.lo, box.hi):
        if x < lo:
            d = lo - x
            s += d * d
        elif x > hi:
            d = x - hi
            s += d * d
    return s


def box_relate(a: Aabb, b: Aabb) -> Relation:
    """Classify ``b`` against ``a``; ``A_CONTAINS_B`` means b is a subset of a."""
    if is_empty(a):
        return Relation.DISJOINT
    if is_empty(b):
        return Relation.A_CONTAINS_B
    contains = True
    for alo, ahi, blo, bhi in zip(a.lo, a.hi, b.lo, b.hi):
        if bhi < alo or blo > ahi:
            return Relation.DISJOINT
        if blo < alo or bhi > ahi:
            contains = False
    return Relation.A_CONTAINS_B if contains else Relation.INTERSECTS


def box_contains_point(box: Aabb, p) -> bool:
    for x, lo, hi in zip(_coords(p), box.lo, box.hi):
        if x < lo or x > hi:
            return False
    return True


def box_merge(a: Aabb, b: Aabb) -> Aabb:
    if is_empty(a):
        return b
    if is_empty(b):
        return a
    return Aabb(
        tuple(map(min, a.lo, b.lo)),
        tuple(map(max, a.hi, b.hi)),
    )


def box_extend(a: Aabb, p) -> Aabb:
    c = tuple(int(x) for x in _coords(p))
    if is_empty(a):
        return Aabb(c, c)
    return Aabb(tuple(map(min, a.lo, c)), tuple(map(max, a.hi, c)))


def box_of(points: Iterable, dims: int | None = None) -> Aabb:
    box = None
    for p in points:
        box = box_extend(box if box is not None else empty_box(len(_coords(p))), p)
    if box is None:
        if dims is None:
            raise ValueError("dims is required for an empty point sequence")
        return empty_box(dims)
    return box


def box_of_array(coords: np.ndarray) -> Aabb:
    """Tight box of an ``(n, D)`` coordinate array (empty sentinel when n == 0)."""
    if len(coords) == 0:
        return empty_box(coords.shape[1])
    return Aabb(tuple(coords.min(axis=0).tolist()), tuple(coords.max(axis=0).tolist()))


def sq_dists(coords: np.ndarray, q: Sequence[int]) -> np.ndarray:
    """Exact squared distances from every row of ``coords`` to ``q``.

    Returns uint64 when every per-dimension difference is below 2**31
    (three such squares cannot overflow), otherwise an object array of
    Python ints.
    """
    diff = coords - np.asarray(q, dtype=np.int64)
    if len(diff) == 0:
        return np.zeros(0, dtype=np.uint64)
    np.abs(diff, out=diff)
    if diff.max() < _SAFE_DIFF:
        d = diff.astype(np.uint64)
        return (d * d).sum(axis=1, dtype=np.uint64)
    d = diff.astype(object)
    return (d * d).sum(axis=1)


@dataclass
class PointSet:
    """Columnar batch of points: ``coords`` is ``(n, D)`` int64, ``ids`` is ``(n,)`` int64."""

    coords: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.int64)
        if self.coords.ndim != 2:
            raise ValueError("coords must be a 2-d array")
        if self.coords.shape[1] not in (2, 3):
            raise ValueError(f"points must have 2 or 3 coordinates, got {self.coords.shape[1]}")
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int64)
        if self.ids.shape != (len(self.coords),):
            raise ValueError("ids must be a 1-d array matching coords")
        if len(self.coords) and np.abs(self.coords).max() >= COORD_LIMIT:
            raise ValueError("coordinates exceed the supported range of +-2**62")

    @classmethod
    def _wrap(cls, coords: np.ndarray, ids: np.ndarray) -> "PointSet":
        # trusted arrays, skips validation
        ps = object.__new__(cls)
        ps.coords = coords
        ps.ids = ids
        return ps

    @classmethod
    def from_coords(cls, coords, ids=None, start: int = 0) -> "PointSet":
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim == 1:
            coords = coords.reshape(0, 2) if coords.size == 0 else coords.reshape(1, -1)
        if ids is None:
            ids = np.arange(start, start + len(coords), dtype=np.int64)
        return cls(coords, ids)

    @classmethod
    def from_points(cls, points: Sequence[Point], dims: int | None = None) -> "PointSet":
        if not points:
            return cls.empty(dims or 2)
        return cls(np.array([p.coords for p in points], dtype=np.int64),
                   np.array([p.id for p in points], dtype=np.int64))

    @classmethod
    def empty(cls, dims: int) -> "PointSet":
        return cls(np.zeros((0, dims), dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def concat(cls, parts: Sequence["PointSet"], dims: int | None = None) -> "PointSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(dims or 2)
        return cls._wrap(np.concatenate([p.coords for p in parts]), np.concatenate([p.ids for p in parts]))

    @property
    def dims(self) -> int:
        return self.coords.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, idx) -> "PointSet":
        if isinstance(idx, (int, np.integer)):
            idx = slice(int(idx), int(idx) + 1)
        return PointSet._wrap(self.coords[idx], self.ids[idx])

    def point(self, i: int) -> Point:
        return Point(tuple(self.coords[i].tolist()), int(self.ids[i]))

    def points(self) -> list[Point]:
        return [Point(tuple(c), i) for c, i in zip(self.coords.tolist(), self.ids.tolist())]

    def bbox(self) -> Aabb:
        return box_of_array(self.coords)
