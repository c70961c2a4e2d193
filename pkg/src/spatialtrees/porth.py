"""P-Orth tree: a parallel orth-tree (quadtree / octree) without curve codes.

Construction and batch updates materialise ``levels`` tree levels at a time
as a skeleton, sieve the points into its buckets and recurse per bucket.
The resulting tree depends only on the stored multiset and the root
region: a node is a leaf iff it holds at most ``phi`` points or its cell is
a single grid point, otherwise it has ``2**D`` children split at the cell
midpoints. Empty children are explicit empty leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .geometry import (
    Aabb,
    PointSet,
    box_merge,
    box_of_array,
    empty_box,
    is_empty,
)
from .sieve import Skeleton, child_cell, is_unit_cell, sieve
from ._parallel import process_map, resolve_workers

__all__ = [
    "OrthParams",
    "OrthLeaf",
    "OrthInterior",
    "POrthTree",
    "OutOfRegionError",
    "MissingPointError",
    "build_orth",
    "batch_insert_orth",
    "batch_delete_orth",
    "height",
    "size",
]


class OutOfRegionError(ValueError):
    pass


class MissingPointError(KeyError):
    def __init__(self, point_id: int):
        super().__init__(f"point id {point_id} is not stored in the tree")
        self.point_id = point_id


@dataclass(frozen=True)
class OrthParams:
    phi: int = 32
    levels: Optional[int] = None
    chunk: Optional[int] = None

    def resolved(self, dims: int) -> "OrthParams":
        levels = self.levels
        if levels is None:
            levels = {2: 3, 3: 2}.get(dims, max(1, 6 // dims))
        if self.phi < 1 or levels < 1:
            raise ValueError("phi and levels must be positive")
        return OrthParams(self.phi, levels, self.chunk)


class OrthLeaf:
    __slots__ = ("coords", "ids", "bbox", "cell", "size")
    is_leaf = True
    pivot = None

    def __init__(self, coords: np.ndarray, ids: np.ndarray, cell: Optional[Aabb], bbox: Aabb | None = None):
        self.coords = coords
        self.ids = ids
        self.cell = cell
        self.size = len(ids)
        self.bbox = box_of_array(coords) if bbox is None else bbox


class OrthInterior:
    __slots__ = ("children", "cell", "bbox", "size")
    is_leaf = False
    pivot = None

    def __init__(self, children: tuple, cell: Aabb, bbox: Aabb, size: int):
        self.children = children
        self.cell = cell
        self.bbox = bbox
        self.size = size


def _empty_leaf(cell: Optional[Aabb], dims: int) -> OrthLeaf:
    return OrthLeaf(np.zeros((0, dims), dtype=np.int64), np.zeros(0, dtype=np.int64),
                    cell, empty_box(dims))


def _leaves(node) -> Iterator[OrthLeaf]:
    stack = [node]
    while stack:
        t = stack.pop()
        if t.is_leaf:
            yield t
        else:
            stack.extend(reversed(t.children))


def _flatten(node, cell: Optional[Aabb], dims: int) -> OrthLeaf:
    parts = [leaf for leaf in _leaves(node) if leaf.size]
    if not parts:
        return _empty_leaf(cell, dims)
    if len(parts) == 1:
        return OrthLeaf(parts[0].coords, parts[0].ids, cell, parts[0].bbox)
    return OrthLeaf(np.concatenate([p.coords for p in parts]),
                    np.concatenate([p.ids for p in parts]), cell)


def _combine(kids: list, cell: Aabb, prm: OrthParams, dims: int):
    """Interior node over ``kids``, flattened when it is too small to split."""
    total = sum(k.size for k in kids)
    if total <= prm.phi or is_unit_cell(cell):
        node = OrthInterior(tuple(kids), cell, None, total)
        return _flatten(node, cell, dims)
    bbox = empty_box(dims)
    for k in kids:
        if k.size:
            bbox = box_merge(bbox, k.bbox)
    return OrthInterior(tuple(kids), cell, bbox, total)


def _build(ps: PointSet, cell: Optional[Aabb], prm: OrthParams, workers: int = 1):
    n, dims = len(ps), ps.dims
    if n == 0:
        return _empty_leaf(cell, dims)
    if n <= prm.phi or is_unit_cell(cell):
        return OrthLeaf(ps.coords, ps.ids, cell)
    sk = Skeleton(cell, prm.levels)
    bs = sieve(ps, sk, prm.chunk)
    off = bs.offsets
    levels, phi = prm.levels, prm.phi
    done = {}
    if workers > 1:
        cells = sk.bucket_cells
        big = [i for i, c in enumerate(cells)
               if off[i + 1] - off[i] > phi and c is not None and not is_unit_cell(c)]
        tasks = [(bs.slice(i), cells[i], prm) for i in big]
        done = dict(zip(big, process_map(_build_task, tasks, workers)))

    # Skeleton nodes whose bucket range holds <= phi points (or whose cell is a
    # single grid point) become leaves straight from their contiguous slice.
    def grow(level, prefix, c):
        span = 1 << (dims * (levels - level))
        lo, hi = int(off[prefix * span]), int(off[(prefix + 1) * span])
        if lo == hi:
            return _empty_leaf(c, dims)
        if hi - lo <= phi or is_unit_cell(c):
            return OrthLeaf(ps.coords[lo:hi], ps.ids[lo:hi], c)
        if level == levels:
            node = done.get(prefix)
            return node if node is not None else _build(bs.permuted[lo:hi], c, prm)
        kids = [grow(level + 1, (prefix << dims) | k, child_cell(c, k)) for k in range(sk.fanout)]
        bbox = kids[0].bbox
        for k in kids[1:]:
            if k.size:
                bbox = box_merge(bbox, k.bbox)
        return OrthInterior(tuple(kids), c, bbox, hi - lo)

    return grow(0, 0, cell)


def _build_task(args):
    ps, cell, prm = args
    return _build(ps, cell, prm)


def _update(node, ps: PointSet, prm: OrthParams, op, missing: list):
    """Route ``ps`` through the skeleton retrieved at ``node`` and apply ``op`` per bucket."""
    if len(ps) == 0:
        return node
    if node.is_leaf:
        return op(node, ps)
    sk = Skeleton(node.cell, prm.levels)
    bs = sieve(ps, sk, prm.chunk)
    dims = ps.dims
    off = bs.offsets

    def descend(t, level, prefix):
        span = 1 << (dims * (prm.levels - level))
        lo, hi = int(off[prefix * span]), int(off[(prefix + 1) * span])
        if lo == hi:
            return t
        if t.is_leaf:
            return op(t, bs.permuted[lo:hi])
        if level == prm.levels:
            return _update(t, bs.permuted[lo:hi], prm, op, missing)
        kids = [descend(c, level + 1, (prefix << dims) | k) for k, c in enumerate(t.children)]
        return _combine(kids, t.cell, prm, dims)

    return descend(node, 0, 0)


class POrthTree:
    """Orth-tree over a fixed root region with batched construction and updates.

    Parameters
    ----------
    region : Aabb
        Closed integer box every stored point must lie in. Never grows.
    phi : int
        Leaf wrap; subtrees with at most ``phi`` points are flattened.
    levels : int, optional
        Skeleton height (3 for 2-d, 2 for 3-d by default).
    chunk : int, optional
        Sieve chunk size; defaults to the skeleton bucket count.
    workers : int
        Processes used for construction; ``<= 0`` means all available cores.
    """

    def __init__(self, region: Aabb, phi: int = 32, levels: int | None = None,
                 chunk: int | None = None, workers: int = 1):
        if is_empty(region) or any(l > h for l, h in zip(region.lo, region.hi)):
            raise ValueError("root region must be a non-empty box")
        self.region = Aabb(tuple(int(v) for v in region.lo), tuple(int(v) for v in region.hi))
        self.dims = len(region.lo)
        self.params = OrthParams(phi, levels, chunk).resolved(self.dims)
        self.workers = resolve_workers(workers)
        self.root = _empty_leaf(self.region, self.dims)

    # construction -------------------------------------------------------

    @classmethod
    def build(cls, points: PointSet, region: Aabb | None = None, **kwargs) -> "POrthTree":
        if region is None:
            region = points.bbox()
        tree = cls(region, **kwargs)
        ps = PointSet._wrap(points.coords.copy(), points.ids.copy())
        tree._check_region(ps)
        nworkers = tree.workers if len(ps) >= 4 * tree.params.phi * (1 << (tree.dims * tree.params.levels)) else 1
        tree.root = _build(ps, tree.region, tree.params, nworkers)
        return tree

    def _check_region(self, ps: PointSet) -> None:
        if len(ps) == 0:
            return
        lo = np.array(self.region.lo)
        hi = np.array(self.region.hi)
        outside = ((ps.coords < lo) | (ps.coords > hi)).any(axis=1)
        if outside.any():
            i = int(np.argmax(outside))
            raise OutOfRegionError(
                f"point id {int(ps.ids[i])} at {tuple(ps.coords[i].tolist())} lies outside the root region")

    # updates ------------------------------------------------------------

    def insert(self, batch: PointSet) -> "POrthTree":
        """Insert a batch; the tree is left untouched if any point is out of region."""
        if len(batch) == 0:
            return self
        self._check_region(batch)
        ps = PointSet._wrap(batch.coords.copy(), batch.ids.copy())
        prm, dims = self.params, self.dims

        def rebuild(leaf, part):
            merged = PointSet._wrap(np.concatenate([leaf.coords, part.coords]),
                                    np.concatenate([leaf.ids, part.ids]))
            return _build(merged, leaf.cell, prm)

        self.root = _update(self.root, ps, prm, rebuild, [])
        return self

    def delete(self, batch: PointSet) -> "POrthTree":
        """Delete points matched by id; points are located through their coordinates.

        Raises ``MissingPointError`` for the first batch id not stored,
        leaving the tree unchanged.
        """
        if len(batch) == 0:
            return self
        lo, hi = np.array(self.region.lo), np.array(self.region.hi)
        inside = ((batch.coords >= lo) & (batch.coords <= hi)).all(axis=1)
        if not inside.all():
            raise MissingPointError(int(batch.ids[np.argmin(inside)]))
        ps = PointSet._wrap(batch.coords.copy(), batch.ids.copy())
        missing: list = []

        def remove(leaf, part):
            if len(part) * leaf.size <= 4096:
                eq = leaf.ids[:, None] == part.ids[None, :]
                found, keep = eq.any(axis=0), ~eq.any(axis=1)
            else:
                found, keep = np.isin(part.ids, leaf.ids), ~np.isin(leaf.ids, part.ids)
            if not found.all():
                missing.extend(part.ids[~found].tolist())
            if keep.all():
                return leaf
            return OrthLeaf(leaf.coords[keep], leaf.ids[keep], leaf.cell)

        root = _update(self.root, ps, self.params, remove, missing)
        if missing:
            bad = set(missing)
            first = next(i for i in batch.ids.tolist() if i in bad)
            raise MissingPointError(first)
        self.root = root
        return self

    # accessors ----------------------------------------------------------

    @property
    def size(self) -> int:
        return self.root.size

    def __len__(self) -> int:
        return self.root.size

    def height(self) -> int:
        def h(t):
            if t.is_leaf:
                return 1
            return 1 + max(h(c) for c in t.children)
        return h(self.root)

    def height_bound(self) -> int:
        side = max(h - l + 1 for l, h in zip(self.region.lo, self.region.hi))
        return math.ceil(math.log2(side)) + 1 if side > 1 else 1

    def leaves(self) -> Iterator[OrthLeaf]:
        return _leaves(self.root)

    def leaf_count(self) -> int:
        return sum(1 for leaf in self.leaves() if leaf.size)

    def points(self) -> PointSet:
        parts = [PointSet._wrap(l.coords, l.ids) for l in self.leaves() if l.size]
        return PointSet.concat(parts, self.dims)

    def dump(self) -> list[tuple]:
        """Canonical preorder serialisation: (kind, cell, bbox, size, sorted leaf ids)."""
        out = []

        def walk(t):
            if t.is_leaf:
                out.append(("leaf", t.cell, t.bbox, t.size, tuple(sorted(t.ids.tolist()))))
            else:
                out.append(("interior", t.cell, t.bbox, t.size, ()))
                for c in t.children:
                    walk(c)

        walk(self.root)
        return out

    def audit(self) -> list[str]:
        """Check structural invariants; returns human-readable violations."""
        errors: list[str] = []
        phi, dims = self.params.phi, self.dims
        fan = 1 << dims

        def walk(t, cell, path):
            if t.cell != cell:
                errors.append(f"{path}: cell {t.cell} != expected {cell}")
            if t.is_leaf:
                if t.size != len(t.ids) or t.coords.shape != (len(t.ids), dims):
                    errors.append(f"{path}: leaf arrays inconsistent")
                if t.bbox != box_of_array(t.coords):
                    errors.append(f"{path}: leaf bbox not tight")
                if t.size > phi and not (cell is not None and is_unit_cell(cell)):
                    errors.append(f"{path}: leaf holds {t.size} > phi points")
                if t.size:
                    if cell is None:
                        errors.append(f"{path}: points stored in an unreachable cell")
                    else:
                        lo, hi = np.array(cell.lo), np.array(cell.hi)
                        if ((t.coords < lo) | (t.coords > hi)).any():
                            errors.append(f"{path}: point outside its cell")
                return t.size, t.bbox
            if len(t.children) != fan:
                errors.append(f"{path}: interior node has {len(t.children)} children")
            if is_unit_cell(cell):
                errors.append(f"{path}: unit cell was split")
            total, bbox = 0, empty_box(dims)
            for k, c in enumerate(t.children):
                s, b = walk(c, child_cell(cell, k), f"{path}/{k}")
                total += s
                bbox = box_merge(bbox, b)
            if total != t.size:
                errors.append(f"{path}: size {t.size} != {total}")
            if total <= phi:
                errors.append(f"{path}: interior subtree of size {total} <= phi not flattened")
            if bbox != t.bbox:
                errors.append(f"{path}: bbox not tight")
            return total, bbox

        walk(self.root, self.region, "root")
        if self.height() > self.height_bound():
            errors.append(f"height {self.height()} exceeds bound {self.height_bound()}")
        return errors


def build_orth(points: PointSet, region: Aabb, **params) -> POrthTree:
    return POrthTree.build(points, region, **params)


def batch_insert_orth(tree: POrthTree, batch: PointSet) -> POrthTree:
    return tree.insert(batch)


def batch_delete_orth(tree: POrthTree, batch: PointSet) -> POrthTree:
    return tree.delete(batch)


def height(tree) -> int:
    return tree.height()


def size(tree) -> int:
    return tree.size
