"""k-NN, range-count and range-list over P-Orth and SPaC trees, plus linear-scan oracles.

Both tree families expose the same node protocol: every node has
``is_leaf``, ``bbox`` and ``size``; leaves carry ``coords``/``ids``
arrays; interior nodes carry ``children`` (entries may be ``None``) and a
``pivot`` point, which is ``None`` for orth-tree nodes.

Ties are broken by ``(squared distance, id)`` everywhere, so results are
comparable across index families.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Aabb, Point, PointSet, Relation, box_contains_point, box_relate, sq_dist

__all__ = [
    "KnnResult",
    "knn",
    "range_count",
    "range_list",
    "oracle_knn",
    "oracle_knn_heap",
    "oracle_range",
    "oracle_range_count",
]


@dataclass
class KnnResult:
    """Neighbours as ``(Point, squared distance)`` pairs ordered by ``(distance, id)``."""

    neighbors: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.neighbors)

    @property
    def distances(self) -> list[int]:
        return [d for _, d in self.neighbors]

    @property
    def ids(self) -> list[int]:
        return [p.id for p, _ in self.neighbors]

    def keys(self) -> list[tuple[int, int]]:
        return [(d, p.id) for p, d in self.neighbors]


def _root(index):
    return getattr(index, "root", index)


def _qcoords(q) -> tuple:
    return tuple(int(v) for v in (q.coords if isinstance(q, Point) else q))


def _box_gap(q: tuple, box: Aabb) -> int:
    s = 0
    for x, lo, hi in zip(q, box.lo, box.hi):
        if x < lo:
            s += (lo - x) * (lo - x)
        elif x > hi:
            s += (x - hi) * (x - hi)
    return s


_SAFE = 1 << 31


def _leaf_dists(coords: np.ndarray, q: tuple) -> list[int]:
    diff = coords - np.asarray(q, dtype=np.int64)
    np.abs(diff, out=diff)
    if diff.size and diff.max() >= _SAFE:
        d = diff.astype(object)
    else:
        d = diff.astype(np.uint64)
    return (d * d).sum(axis=1).tolist()


def knn(index, q, k: int, on_prune: Optional[Callable] = None) -> KnnResult:
    """Exact k nearest neighbours of ``q``.

    Depth-first traversal visiting children in increasing box distance. A
    subtree is pruned only when its box lies strictly farther than the
    current k-th candidate: a tie could still hold a smaller id.
    ``on_prune(node)`` is called for every pruned subtree.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    qc = _qcoords(q)
    root = _root(index)
    if root is None or root.size == 0:
        return KnnResult([])
    heap: list = []  # max-heap of (-dist, -id, coords)

    def offer(d: int, pid: int, coords) -> None:
        if len(heap) < k:
            heapq.heappush(heap, (-d, -pid, coords))
        elif (d, pid) < (-heap[0][0], -heap[0][1]):
            heapq.heapreplace(heap, (-d, -pid, coords))

    def visit(node) -> None:
        if node.is_leaf:
            if node.size == 0:
                return
            dists = _leaf_dists(node.coords, qc)
            ids = node.ids.tolist()
            rows = None
            for j, d in enumerate(dists):
                if len(heap) >= k and (d, ids[j]) >= (-heap[0][0], -heap[0][1]):
                    continue
                if rows is None:
                    rows = node.coords.tolist()
                offer(d, ids[j], tuple(rows[j]))
            return
        if node.pivot is not None:
            p = node.pivot
            offer(sq_dist(qc, p.coords), p.id, p.coords)
        kids = [(_box_gap(qc, c.bbox), i, c) for i, c in enumerate(node.children)
                if c is not None and c.size > 0]
        kids.sort(key=lambda t: (t[0], t[1]))
        for gap, _, child in kids:
            if len(heap) >= k and gap > -heap[0][0]:
                if on_prune is not None:
                    on_prune(child)
                continue
            visit(child)

    visit(root)
    out = sorted((-nd, -npid, c) for nd, npid, c in heap)
    return KnnResult([(Point(c, pid), d) for d, pid, c in out])


def _emit_all(node, parts: list) -> None:
    stack = [node]
    while stack:
        t = stack.pop()
        if t is None or t.size == 0:
            continue
        if t.is_leaf:
            parts.append((t.coords, t.ids))
            continue
        if t.pivot is not None:
            parts.append((np.array([t.pivot.coords], dtype=np.int64),
                          np.array([t.pivot.id], dtype=np.int64)))
        stack.extend(t.children)


def _walk_range(node, box: Aabb, lo: np.ndarray, hi: np.ndarray, count_only: bool, acc: list) -> int:
    if node is None or node.size == 0:
        return 0
    rel = box_relate(box, node.bbox)
    if rel is Relation.DISJOINT:
        return 0
    if rel is Relation.A_CONTAINS_B:
        if not count_only:
            _emit_all(node, acc)
        return node.size
    if node.is_leaf:
        inside = ((node.coords >= lo) & (node.coords <= hi)).all(axis=1)
        if not count_only:
            acc.append((node.coords[inside], node.ids[inside]))
        return int(inside.sum())
    total = 0
    if node.pivot is not None and box_contains_point(box, node.pivot.coords):
        total += 1
        if not count_only:
            acc.append((np.array([node.pivot.coords], dtype=np.int64),
                        np.array([node.pivot.id], dtype=np.int64)))
    for child in node.children:
        total += _walk_range(child, box, lo, hi, count_only, acc)
    return total


def range_count(index, box: Aabb) -> int:
    """Number of stored points inside the closed box."""
    return _walk_range(_root(index), box, np.asarray(box.lo), np.asarray(box.hi), True, [])


def range_list(index, box: Aabb) -> list[Point]:
    """Stored points inside the closed box, in no particular order."""
    acc: list = []
    _walk_range(_root(index), box, np.asarray(box.lo), np.asarray(box.hi), False, acc)
    out = []
    for coords, ids in acc:
        out.extend(Point(tuple(c), i) for c, i in zip(coords.tolist(), ids.tolist()))
    return out


# --------------------------------------------------------------------------
# oracles: straight scans over the raw point set, sharing no code with the trees
# --------------------------------------------------------------------------

def _oracle_dists(points: PointSet, q: tuple) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(0, dtype=np.uint64)
    diff = np.abs(points.coords - np.array(q, dtype=np.int64))
    if int(diff.max()) < _SAFE:
        u = diff.astype(np.uint64)
        return (u * u).sum(axis=1, dtype=np.uint64)
    o = diff.astype(object)
    return (o * o).sum(axis=1)


def oracle_knn(points: PointSet, q, k: int) -> KnnResult:
    """Sort-based brute force: order every point by ``(distance, id)`` and cut at k."""
    qc = _qcoords(q)
    d = _oracle_dists(points, qc)
    order = sorted(range(len(points)), key=lambda i: (int(d[i]), int(points.ids[i])))[:k] \
        if d.dtype == object else np.lexsort((points.ids, d))[:k].tolist()
    return KnnResult([(points.point(i), int(d[i])) for i in order])


def oracle_knn_heap(points: PointSet, q, k: int) -> KnnResult:
    """Heap-based brute force over plain Python integers."""
    qc = _qcoords(q)
    cand = []
    for c, pid in zip(points.coords.tolist(), points.ids.tolist()):
        d = sum((a - b) * (a - b) for a, b in zip(c, qc))
        cand.append((d, pid, tuple(c)))
    best = heapq.nsmallest(k, cand)
    return KnnResult([(Point(c, pid), d) for d, pid, c in best])


def oracle_range(points: PointSet, box: Aabb) -> list[Point]:
    inside = np.ones(len(points), dtype=bool)
    for d in range(points.dims):
        col = points.coords[:, d]
        inside &= (col >= box.lo[d]) & (col <= box.hi[d])
    return [points.point(int(i)) for i in np.nonzero(inside)[0]]


def oracle_range_count(points: PointSet, box: Aabb) -> int:
    return len(oracle_range(points, box))
