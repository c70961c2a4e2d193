"""Sieving points into the buckets of a multi-level orth-tree skeleton.

A skeleton is the complete ``2**D``-ary tree of ``levels`` midpoint splits
over an integer cell. Cells are closed integer boxes ``[lo, hi]``; the split
point in a dimension is ``lo + (hi - lo + 1) // 2`` and a point goes high
when its coordinate is ``>=`` the split. A dimension whose extent is a
single grid value is not split (its child bit is always 0), so a child on
the high side of such a dimension has no cell (``None``).

``sieve`` is a chunked counting sort: per-chunk bucket counts, a
bucket-major exclusive scan over the chunk x bucket matrix, then a scatter
of every chunk into its reserved ranges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .geometry import Aabb, PointSet, box_contains_point
from ._parallel import thread_map

__all__ = [
    "ClassificationError",
    "Skeleton",
    "BucketSlices",
    "child_cell",
    "split_point",
    "is_unit_cell",
    "sieve",
    "naive_partition",
]


class ClassificationError(ValueError):
    pass


def split_point(lo: int, hi: int) -> int:
    return lo + ((hi - lo + 1) >> 1)


def is_unit_cell(cell: Aabb) -> bool:
    return cell.lo == cell.hi


def child_cell(cell: Optional[Aabb], child: int) -> Optional[Aabb]:
    """Cell of child ``child`` (bit ``d`` set means high side of dimension ``d``)."""
    if cell is None:
        return None
    lo, hi = list(cell.lo), list(cell.hi)
    for d in range(len(lo)):
        high = (child >> d) & 1
        if lo[d] == hi[d]:
            if high:
                return None
            continue
        mid = split_point(lo[d], hi[d])
        if high:
            lo[d] = mid
        else:
            hi[d] = mid - 1
    return Aabb(tuple(lo), tuple(hi))


class Skeleton:
    """Implicit ``levels``-deep complete ``2**D``-ary split tree over ``region``."""

    def __init__(self, region: Aabb, levels: int):
        if levels < 0:
            raise ValueError("levels must be non-negative")
        self.region = region
        self.levels = levels
        self.dims = len(region.lo)
        self.fanout = 1 << self.dims

    @property
    def n_buckets(self) -> int:
        return 1 << (self.dims * self.levels)

    def node_cell(self, level: int, index: int) -> Optional[Aabb]:
        """Cell of the ``index``-th node at depth ``level`` (root is depth 0)."""
        cell = self.region
        for j in range(level - 1, -1, -1):
            cell = child_cell(cell, (index >> (j * self.dims)) & (self.fanout - 1))
            if cell is None:
                return None
        return cell

    @cached_property
    def bucket_cells(self) -> list:
        cells = [self.region]
        for _ in range(self.levels):
            cells = [child_cell(c, k) for c in cells for k in range(self.fanout)]
        return cells

    def classify(self, p) -> int:
        coords = p.coords if hasattr(p, "coords") else tuple(p)
        if not box_contains_point(self.region, coords):
            raise ClassificationError(f"point {tuple(coords)} lies outside region {self.region}")
        lo, hi = list(self.region.lo), list(self.region.hi)
        bucket = 0
        for _ in range(self.levels):
            child = 0
            for d, x in enumerate(coords):
                if lo[d] == hi[d]:
                    continue
                mid = split_point(lo[d], hi[d])
                if x >= mid:
                    child |= 1 << d
                    lo[d] = mid
                else:
                    hi[d] = mid - 1
            bucket = (bucket << self.dims) | child
        return bucket

    def classify_many(self, coords: np.ndarray) -> np.ndarray:
        n = len(coords)
        rlo = np.array(self.region.lo, dtype=np.int64)
        rhi = np.array(self.region.hi, dtype=np.int64)
        if n and ((coords < rlo).any() or (coords > rhi).any()):
            bad = int(np.nonzero(((coords < rlo) | (coords > rhi)).any(axis=1))[0][0])
            raise ClassificationError(
                f"point {tuple(coords[bad].tolist())} lies outside region {self.region}")
        buckets = np.zeros(n, dtype=np.int64)
        if self.levels == 0 or n == 0:
            return buckets
        lo = np.broadcast_to(rlo, coords.shape).copy()
        hi = np.broadcast_to(rhi, coords.shape).copy()
        weights = (1 << np.arange(self.dims, dtype=np.int64))
        for _ in range(self.levels):
            mid = lo + ((hi - lo + 1) >> 1)
            split = hi > lo
            high = (coords >= mid) & split
            buckets = (buckets << self.dims) | (high @ weights)
            np.copyto(lo, mid, where=high)
            np.copyto(hi, mid - 1, where=split & ~high)
        return buckets


@dataclass
class BucketSlices:
    permuted: PointSet
    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def slice(self, i: int) -> PointSet:
        return self.permuted[int(self.offsets[i]):int(self.offsets[i + 1])]

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)


def _groups(nchunks: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, nchunks))
    bounds = np.linspace(0, nchunks, workers + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def sieve(points: PointSet, sk: Skeleton, chunk: int | None = None,
          workers: int = 1, buckets: np.ndarray | None = None) -> BucketSlices:
    """Reorder ``points`` in place so every skeleton bucket is contiguous.

    ``chunk`` defaults to the bucket count. ``buckets`` may carry
    precomputed classifications. Order inside a bucket is unspecified.
    """
    n, nb = len(points), sk.n_buckets
    if n == 0:
        return BucketSlices(points, np.zeros(nb + 1, dtype=np.int64))
    if buckets is None:
        buckets = sk.classify_many(points.coords)
    if chunk is None and workers <= 1:
        # one chunk covering everything: the scan degenerates to a counting sort
        perm = np.argsort(buckets, kind="stable")
        offsets = np.zeros(nb + 1, dtype=np.int64)
        np.cumsum(np.bincount(buckets, minlength=nb), out=offsets[1:])
        points.coords[...] = points.coords[perm]
        points.ids[...] = points.ids[perm]
        return BucketSlices(points, offsets)
    chunk = chunk or nb
    if chunk < 1:
        raise ValueError("chunk size must be positive")
    nchunks = -(-n // chunk)
    groups = _groups(nchunks, workers)

    def count(group):
        c0, c1 = group
        b = buckets[c0 * chunk:min(c1 * chunk, n)]
        local = np.arange(len(b), dtype=np.int64) // chunk
        key = local * nb + b
        return np.bincount(key, minlength=(c1 - c0) * nb).reshape(c1 - c0, nb)

    counts = np.vstack(thread_map(count, groups, workers))
    # bucket-major exclusive scan: all of bucket 0 (chunk by chunk), then bucket 1, ...
    flat = counts.T.ravel()
    starts = (np.cumsum(flat) - flat).reshape(nb, nchunks).T.ravel()
    perm = np.empty(n, dtype=np.int64)

    def distribute(group):
        c0, c1 = group
        a, z = c0 * chunk, min(c1 * chunk, n)
        b = buckets[a:z]
        key = (np.arange(a, z, dtype=np.int64) // chunk) * nb + b
        order = np.argsort(key, kind="stable")
        sk_ = key[order]
        rank = np.arange(len(order), dtype=np.int64) - np.searchsorted(sk_, sk_, side="left")
        perm[starts[sk_] + rank] = order + a

    thread_map(distribute, groups, workers)
    points.coords[...] = points.coords[perm]
    points.ids[...] = points.ids[perm]
    offsets = np.zeros(nb + 1, dtype=np.int64)
    np.cumsum(counts.sum(axis=0), out=offsets[1:])
    return BucketSlices(points, offsets)


def naive_partition(points: PointSet, sk: Skeleton) -> list[list[int]]:
    """Reference partition: classify each point one at a time, group ids by bucket."""
    out: list[list[int]] = [[] for _ in range(sk.n_buckets)]
    for c, i in zip(points.coords.tolist(), points.ids.tolist()):
        out[sk.classify(c)].append(i)
    return out
