"""SPaC-trees: weight-balanced search trees keyed by space-filling-curve codes.

Every stored point is keyed by ``(code, id)``. Interior nodes hold one
entry (the pivot), leaves hold up to ``2 * phi`` entries in arrays and may
be *unsorted*: their entries respect the key range of the subtree but not
each other. Leaves are sorted lazily, only when a rebalancing step has to
look inside them (``expose``, leaf redistribution, pulling a maximum).

Rebalancing uses only ``join`` (weight-balanced join with single and double
rotations); batch insertion and deletion are divide-and-conquer over the
pivots followed by ``join`` on the way back up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .geometry import Aabb, Point, PointSet, box_merge, box_of_array, empty_box
from .sfc import SfcKind, default_bits, encode_array
from ._parallel import process_map, resolve_workers, thread_map

__all__ = [
    "SpacParams",
    "SpacLeaf",
    "SpacInterior",
    "SpacTree",
    "DuplicateIdError",
    "MissingPointError",
    "hybrid_sort",
    "build_sorted",
    "build_spac",
    "batch_insert_spac",
    "batch_delete_spac",
    "expose",
]


class DuplicateIdError(ValueError):
    pass


class MissingPointError(KeyError):
    def __init__(self, point_id: int):
        super().__init__(f"point id {point_id} is not stored in the tree")
        self.point_id = point_id


@dataclass(frozen=True)
class SpacParams:
    phi: int = 40
    alpha: float = 0.2
    rebuild_factor: int = 4

    def __post_init__(self):
        if self.phi < 1:
            raise ValueError("phi must be positive")
        if not 0 < self.alpha <= 0.25:
            raise ValueError("alpha must lie in (0, 0.25]")


class SpacLeaf:
    __slots__ = ("codes", "ids", "coords", "sorted", "bbox", "size")
    is_leaf = True
    pivot = None

    def __init__(self, codes, ids, coords, sorted_: bool, bbox: Aabb | None = None):
        self.codes = codes
        self.ids = ids
        self.coords = coords
        self.sorted = sorted_
        self.size = len(ids)
        self.bbox = box_of_array(coords) if bbox is None else bbox

    def sort(self) -> None:
        if not self.sorted:
            o = np.lexsort((self.ids, self.codes))
            self.codes, self.ids, self.coords = self.codes[o], self.ids[o], self.coords[o]
            self.sorted = True


class SpacInterior:
    __slots__ = ("left", "right", "pivot", "pcode", "bbox", "size", "children")
    is_leaf = False

    def __init__(self, left, pcode: int, pivot: Point, right, bbox: Aabb, size: int):
        self.left = left
        self.right = right
        self.pcode = pcode
        self.pivot = pivot
        self.bbox = bbox
        self.size = size
        self.children = (left, right)


# an entry is (code, id, coords-tuple)
def _entry_at(codes, ids, coords, i: int) -> tuple:
    return int(codes[i]), int(ids[i]), tuple(coords[i].tolist())


def _size(t) -> int:
    return 0 if t is None else t.size


def _rank(codes: np.ndarray, ids: np.ndarray, code: int, pid: int) -> int:
    """Number of entries of a sorted slice whose key is below ``(code, pid)``."""
    c = np.uint64(code)
    lo = int(codes.searchsorted(c, "left"))
    hi = int(codes.searchsorted(c, "right"))
    if lo == hi:
        return lo
    return lo + int(ids[lo:hi].searchsorted(pid, "left"))


def _rank_many(codes: np.ndarray, ids: np.ndarray, pcodes: np.ndarray, pids: np.ndarray) -> np.ndarray:
    lo = codes.searchsorted(pcodes, "left")
    hi = codes.searchsorted(pcodes, "right")
    out = lo.astype(np.int64)
    for j in np.nonzero(hi > lo)[0]:
        out[j] = lo[j] + ids[lo[j]:hi[j]].searchsorted(pids[j], "left")
    return out


def _lexsort(codes, ids) -> np.ndarray:
    return np.lexsort((ids, codes))


# --------------------------------------------------------------------------
# hybrid sample sort: curve codes are computed as blocks are first touched
# --------------------------------------------------------------------------

DIRECT_SORT_THRESHOLD = 4096
_BLOCK_UNIT = 1024
_OVERSAMPLE = 16


def hybrid_sort(coords: np.ndarray, ids: np.ndarray, kind: SfcKind, bits: int | None = None,
                workers: int = 1, direct_threshold: int = DIRECT_SORT_THRESHOLD,
                seed: int = 0x5eed):
    """Sample sort of ``(code, id)`` pairs, encoding each block on first touch.

    Returns ``(codes, ids, perm)`` sorted by ``(code, id)``, where ``perm``
    maps each output slot to its input row so coordinates can be fetched
    afterwards. Only codes, ids and positions move during the sort.
    """
    n = len(ids)
    ids = np.asarray(ids, dtype=np.int64)
    if n <= direct_threshold:
        codes = encode_array(coords, kind, bits, ids)
        o = _lexsort(codes, ids)
        return codes[o], ids[o], o
    nblocks = max(2, math.ceil(math.sqrt(n / _BLOCK_UNIT)))
    nbuckets = nblocks
    rng = np.random.default_rng(seed)
    sample = np.sort(rng.choice(n, size=min(n, nbuckets * _OVERSAMPLE), replace=False))
    scodes = encode_array(coords[sample], kind, bits, ids[sample])
    sids = ids[sample]
    so = _lexsort(scodes, sids)
    picks = so[_OVERSAMPLE - 1::_OVERSAMPLE][:nbuckets - 1]
    pcodes, pids = scodes[picks], sids[picks]
    F = np.linspace(0, n, nblocks + 1).astype(np.int64)

    def sort_block(i):
        a, b = int(F[i]), int(F[i + 1])
        c = encode_array(coords[a:b], kind, bits, ids[a:b])
        k = ids[a:b]
        o = _lexsort(c, k)
        c, k = c[o], k[o]
        bounds = np.empty(nbuckets + 1, dtype=np.int64)
        bounds[0], bounds[-1] = 0, b - a
        bounds[1:-1] = _rank_many(c, k, pcodes, pids)
        return c, k, o + a, bounds

    blocks = thread_map(sort_block, range(nblocks), workers)
    counts = np.array([np.diff(blk[3]) for blk in blocks])  # (nblocks, nbuckets)
    flat = counts.T.ravel()
    starts = (np.cumsum(flat) - flat).reshape(nbuckets, nblocks).T
    out_c = np.empty(n, dtype=np.uint64)
    out_i = np.empty(n, dtype=np.int64)
    out_p = np.empty(n, dtype=np.int64)
    for bi, (c, k, p, bounds) in enumerate(blocks):
        shift = np.repeat(starts[bi] - bounds[:-1], counts[bi])
        dest = shift + np.arange(len(c), dtype=np.int64)
        out_c[dest], out_i[dest], out_p[dest] = c, k, p
    Fb = np.zeros(nbuckets + 1, dtype=np.int64)
    np.cumsum(counts.sum(axis=0), out=Fb[1:])

    def sort_bucket(j):
        a, b = int(Fb[j]), int(Fb[j + 1])
        if b - a > 1:
            o = _lexsort(out_c[a:b], out_i[a:b])
            out_c[a:b], out_i[a:b], out_p[a:b] = out_c[a:b][o], out_i[a:b][o], out_p[a:b][o]

    thread_map(sort_bucket, range(nbuckets), workers)
    return out_c, out_i, out_p


# --------------------------------------------------------------------------
# tree operations
# --------------------------------------------------------------------------

class _Ops:
    """Join-based primitives bound to a leaf wrap ``phi`` and balance ``alpha``."""

    def __init__(self, params: SpacParams, dims: int):
        self.phi = params.phi
        self.rebuild_limit = params.rebuild_factor * params.phi
        a = Fraction(str(params.alpha))
        self.a_num, self.a_den = a.numerator, a.denominator
        self.dims = dims

    # weights -----------------------------------------------------------

    def balanced(self, wa: int, wb: int) -> bool:
        t = self.a_num * (wa + wb)
        return wa * self.a_den >= t and wb * self.a_den >= t

    def too_light(self, w: int, total: int) -> bool:
        return w * self.a_den < self.a_num * total

    # constructors --------------------------------------------------------

    def leaf(self, codes, ids, coords, sorted_: bool, bbox=None):
        if len(ids) == 0:
            return None
        return SpacLeaf(codes, ids, coords, sorted_, bbox)

    def interior(self, left, entry, right) -> SpacInterior:
        code, pid, pc = entry
        if left is not None and right is not None:
            lb, rb = left.bbox, right.bbox
            bbox = Aabb(tuple(map(min, lb.lo, rb.lo, pc)), tuple(map(max, lb.hi, rb.hi, pc)))
            return SpacInterior(left, code, Point(pc, pid), right, bbox, left.size + right.size + 1)
        bbox = Aabb(pc, pc)
        if left is not None:
            bbox = box_merge(left.bbox, bbox)
        if right is not None:
            bbox = box_merge(bbox, right.bbox)
        return SpacInterior(left, code, Point(pc, pid), right, bbox, _size(left) + _size(right) + 1)

    def build_sorted(self, codes, ids, coords, lo: int = 0, hi: int | None = None):
        if hi is None:
            hi = len(ids)
        n = hi - lo
        if n <= 0:
            return None
        if n <= self.phi:
            return SpacLeaf(codes[lo:hi], ids[lo:hi], coords[lo:hi], True)
        m = lo + n // 2
        left = self.build_sorted(codes, ids, coords, lo, m)
        right = self.build_sorted(codes, ids, coords, m + 1, hi)
        return self.interior(left, _entry_at(codes, ids, coords, m), right)

    # flattening ----------------------------------------------------------

    def _collect(self, t, parts: list) -> bool:
        """Append in-order parts of ``t``; return whether every leaf was sorted."""
        if t is None:
            return True
        if t.is_leaf:
            parts.append((t.codes, t.ids, t.coords))
            return t.sorted
        ok = self._collect(t.left, parts)
        p = t.pivot
        parts.append((np.array([t.pcode], dtype=np.uint64), np.array([p.id], dtype=np.int64),
                      np.array([p.coords], dtype=np.int64)))
        return self._collect(t.right, parts) and ok

    def flatten(self, left, entry, right, sort: bool):
        parts: list = []
        ok = self._collect(left, parts)
        code, pid, pc = entry
        parts.append((np.array([code], dtype=np.uint64), np.array([pid], dtype=np.int64),
                      np.array([pc], dtype=np.int64)))
        ok = self._collect(right, parts) and ok
        codes = np.concatenate([p[0] for p in parts])
        ids = np.concatenate([p[1] for p in parts])
        coords = np.concatenate([p[2] for p in parts])
        if sort and not ok:
            o = _lexsort(codes, ids)
            codes, ids, coords = codes[o], ids[o], coords[o]
            ok = True
        return codes, ids, coords, ok

    # the join framework ----------------------------------------------------

    def node(self, left, entry, right):
        """Make a node, restoring leaf wrapping for small results."""
        n = _size(left) + _size(right) + 1
        if n > 2 * self.phi:
            return self.interior(left, entry, right)
        if n > self.phi:
            codes, ids, coords, _ = self.flatten(left, entry, right, sort=True)
            m = n // 2
            return self.interior(self.leaf(codes[:m], ids[:m], coords[:m], True),
                                 _entry_at(codes, ids, coords, m),
                                 self.leaf(codes[m + 1:], ids[m + 1:], coords[m + 1:], True))
        codes, ids, coords, ok = self.flatten(left, entry, right, sort=False)
        return SpacLeaf(codes, ids, coords, ok)

    def expose(self, t):
        """``(left, entry, right)`` of ``t``; a leaf is sorted and split at its middle."""
        if not t.is_leaf:
            return t.left, (t.pcode, t.pivot.id, t.pivot.coords), t.right
        t.sort()
        n, m = t.size, t.size // 2
        left = self.build_sorted(t.codes, t.ids, t.coords, 0, m)
        right = self.build_sorted(t.codes, t.ids, t.coords, m + 1, n)
        return left, _entry_at(t.codes, t.ids, t.coords, m), right

    def join(self, left, entry, right):
        wl, wr = _size(left) + 1, _size(right) + 1
        if wl + wr - 1 <= 2 * self.phi:
            return self.node(left, entry, right)
        if self.too_light(wr, wl + wr):
            return self.join_right(left, entry, right)
        if self.too_light(wl, wl + wr):
            return self.join_left(left, entry, right)
        return self.node(left, entry, right)

    def join_right(self, left, entry, right):
        wl, wr = _size(left) + 1, _size(right) + 1
        if wl + wr - 1 <= 2 * self.phi or self.balanced(wl, wr):
            return self.node(left, entry, right)
        l, k2, c = self.expose(left)
        t = self.join_right(c, entry, right)
        w_l, w_t = _size(l) + 1, _size(t) + 1
        if self.balanced(w_l, w_t):
            return self.node(l, k2, t)
        l1, k1, r1 = self.expose(t)
        w_l1, w_r1 = _size(l1) + 1, _size(r1) + 1
        if self.balanced(w_l, w_l1) and self.balanced(w_l + w_l1, w_r1):
            return self.node(self.node(l, k2, l1), k1, r1)
        l2, k3, r2 = self.expose(l1)
        return self.node(self.node(l, k2, l2), k3, self.node(r2, k1, r1))

    def join_left(self, left, entry, right):
        wl, wr = _size(left) + 1, _size(right) + 1
        if wl + wr - 1 <= 2 * self.phi or self.balanced(wl, wr):
            return self.node(left, entry, right)
        c, k2, r = self.expose(right)
        t = self.join_left(left, entry, c)
        w_t, w_r = _size(t) + 1, _size(r) + 1
        if self.balanced(w_t, w_r):
            return self.node(t, k2, r)
        l1, k1, r1 = self.expose(t)
        w_l1, w_r1 = _size(l1) + 1, _size(r1) + 1
        if self.balanced(w_r1, w_r) and self.balanced(w_l1, w_r1 + w_r):
            return self.node(l1, k1, self.node(r1, k2, r))
        l2, k3, r2 = self.expose(r1)
        return self.node(self.node(l1, k1, l2), k3, self.node(r2, k2, r))

    def split_last(self, t):
        """Remove the maximum entry of non-empty ``t``; returns ``(rest, entry)``."""
        if t.is_leaf:
            t.sort()
            n = t.size
            last = _entry_at(t.codes, t.ids, t.coords, n - 1)
            return self.leaf(t.codes[:n - 1], t.ids[:n - 1], t.coords[:n - 1], True), last
        if t.right is None:
            return t.left, (t.pcode, t.pivot.id, t.pivot.coords)
        rest, last = self.split_last(t.right)
        return self.join(t.left, (t.pcode, t.pivot.id, t.pivot.coords), rest), last

    def join2(self, left, right):
        if left is None:
            return right
        if right is None:
            return left
        rest, k = self.split_last(left)
        return self.join(rest, k, right)

    # batch updates ---------------------------------------------------------

    def insert_sorted(self, t, codes, ids, coords, lo: int, hi: int):
        m = hi - lo
        if m == 0:
            return t
        if t is None:
            return self.build_sorted(codes, ids, coords, lo, hi)
        if t.is_leaf:
            total = t.size + m
            if total <= self.phi:
                add = coords[lo:hi]
                return SpacLeaf(np.concatenate([t.codes, codes[lo:hi]]),
                                np.concatenate([t.ids, ids[lo:hi]]),
                                np.concatenate([t.coords, add]), False,
                                box_merge(t.bbox, box_of_array(add)))
            if total <= self.rebuild_limit:
                c = np.concatenate([t.codes, codes[lo:hi]])
                k = np.concatenate([t.ids, ids[lo:hi]])
                x = np.concatenate([t.coords, coords[lo:hi]])
                o = _lexsort(c, k)
                return self.build_sorted(c[o], k[o], x[o])
            left, entry, right = self.expose(t)
        else:
            left, entry, right = t.left, (t.pcode, t.pivot.id, t.pivot.coords), t.right
        s = lo + _rank(codes[lo:hi], ids[lo:hi], entry[0], entry[1])
        new_left = self.insert_sorted(left, codes, ids, coords, lo, s)
        new_right = self.insert_sorted(right, codes, ids, coords, s, hi)
        return self.join(new_left, entry, new_right)

    def delete_sorted(self, t, codes, ids, lo: int, hi: int, missing: list):
        m = hi - lo
        if m == 0:
            return t
        if t is None:
            missing.extend(ids[lo:hi].tolist())
            return None
        if t.is_leaf:
            want = ids[lo:hi]
            if m * t.size <= 4096:
                eq = t.ids[:, None] == want[None, :]
                gone = eq.any(axis=1)
            else:
                eq = None
                gone = np.isin(t.ids, want)
            found = int(gone.sum())
            if found != m:
                present = eq.any(axis=0) if eq is not None else np.isin(want, t.ids)
                missing.extend(want[~present].tolist())
            if found == 0:
                return t
            keep = ~gone
            return self.leaf(t.codes[keep], t.ids[keep], t.coords[keep], t.sorted)
        entry = (t.pcode, t.pivot.id, t.pivot.coords)
        s = lo + _rank(codes[lo:hi], ids[lo:hi], entry[0], entry[1])
        hit = s < hi and int(codes[s]) == entry[0] and int(ids[s]) == entry[1]
        new_left = self.delete_sorted(t.left, codes, ids, lo, s, missing)
        new_right = self.delete_sorted(t.right, codes, ids, s + int(hit), hi, missing)
        if hit:
            return self.join2(new_left, new_right)
        if new_left is t.left and new_right is t.right:
            return t
        return self.join(new_left, entry, new_right)


def _build_task(args):
    params, dims, codes, ids, coords = args
    return _Ops(params, dims).build_sorted(codes, ids, coords)


def _parallel_build(ops: _Ops, params: SpacParams, codes, ids, coords, workers: int):
    """``build_sorted`` with the subtrees below the top levels built in worker processes."""
    ranges = []

    def plan(lo, hi, depth):
        n = hi - lo
        if n <= ops.phi or (1 << depth) >= 2 * workers:
            ranges.append((lo, hi))
            return ("task", len(ranges) - 1)
        m = lo + n // 2
        return ("node", plan(lo, m, depth + 1), m, plan(m + 1, hi, depth + 1))

    shape = plan(0, len(ids), 0)
    tasks = [(params, ops.dims, codes[a:b], ids[a:b], coords[a:b]) for a, b in ranges]
    built = process_map(_build_task, tasks, workers)

    def assemble(s):
        if s[0] == "task":
            return built[s[1]]
        _, left, m, right = s
        return ops.interior(assemble(left), _entry_at(codes, ids, coords, m), assemble(right))

    return assemble(shape)


class _IdRegistry:
    """Membership of stored ids: a bitmap for small non-negative ids, a set otherwise."""

    _DENSE_LIMIT = 1 << 26

    def __init__(self):
        self._mask = np.zeros(0, dtype=bool)
        self._other: set = set()

    def _split(self, ids: np.ndarray):
        dense = (ids >= 0) & (ids < self._DENSE_LIMIT)
        return ids[dense], ids[~dense]

    def present(self, ids: np.ndarray) -> np.ndarray:
        out = np.zeros(len(ids), dtype=bool)
        dense = (ids >= 0) & (ids < min(len(self._mask), self._DENSE_LIMIT))
        out[dense] = self._mask[ids[dense]]
        if self._other:
            rest = np.nonzero(~dense)[0]
            out[rest] = [int(i) in self._other for i in ids[rest]]
        return out

    def add(self, ids: np.ndarray) -> None:
        d, o = self._split(ids)
        if len(d):
            top = int(d.max()) + 1
            if top > len(self._mask):
                grown = np.zeros(max(top, 2 * len(self._mask)), dtype=bool)
                grown[:len(self._mask)] = self._mask
                self._mask = grown
            self._mask[d] = True
        self._other.update(o.tolist())

    def remove(self, ids: np.ndarray) -> None:
        d, o = self._split(ids)
        self._mask[d] = False
        self._other.difference_update(o.tolist())


class SpacTree:
    """SPaC-tree over 2-d or 3-d non-negative integer points.

    Parameters
    ----------
    dims : int
        2 or 3.
    kind : SfcKind
        Curve used for keys; ``HILBERT`` gives a SPaC-H-tree, ``MORTON`` a SPaC-Z-tree.
    phi : int
        Leaf wrap (default 40).
    alpha : float
        Weight-balance parameter (default 0.2).
    rebuild_factor : int
        An overflowing leaf is rebuilt from scratch while the merged size stays
        within ``rebuild_factor * phi``; beyond that it is exposed and the
        insertion continues below it.
    workers : int
        Threads/processes used by construction; ``<= 0`` means all cores.
    """

    def __init__(self, dims: int, kind: SfcKind = SfcKind.HILBERT, phi: int = 40,
                 alpha: float = 0.2, rebuild_factor: int = 4, bits: int | None = None,
                 workers: int = 1):
        self.dims = dims
        self.kind = SfcKind(kind)
        self.bits = default_bits(dims) if bits is None else bits
        self.params = SpacParams(phi, alpha, rebuild_factor)
        self.workers = resolve_workers(workers)
        self._ops = _Ops(self.params, dims)
        self._ids = _IdRegistry()
        self.root = None

    # construction -------------------------------------------------------

    @classmethod
    def build(cls, points: PointSet, kind: SfcKind = SfcKind.HILBERT, **kwargs) -> "SpacTree":
        tree = cls(points.dims, kind, **kwargs)
        tree._check_unique(points.ids)
        codes, ids, perm = hybrid_sort(points.coords, points.ids, tree.kind, tree.bits, tree.workers)
        coords = points.coords[perm]
        if tree.workers > 1 and len(ids) > 64 * tree.params.phi:
            tree.root = _parallel_build(tree._ops, tree.params, codes, ids, coords, tree.workers)
        else:
            tree.root = tree._ops.build_sorted(codes, ids, coords)
        tree._ids.add(points.ids)
        return tree

    def _check_unique(self, ids: np.ndarray) -> None:
        if len(np.unique(ids)) != len(ids):
            u, c = np.unique(ids, return_counts=True)
            raise DuplicateIdError(f"batch repeats point id {int(u[c > 1][0])}")

    # updates ------------------------------------------------------------

    def insert(self, batch: PointSet) -> "SpacTree":
        if len(batch) == 0:
            return self
        self._check_unique(batch.ids)
        dup = self._ids.present(batch.ids)
        if dup.any():
            raise DuplicateIdError(f"point id {int(batch.ids[np.argmax(dup)])} is already stored")
        codes, ids, perm = hybrid_sort(batch.coords, batch.ids, self.kind, self.bits)
        coords = batch.coords[perm]
        self.root = self._ops.insert_sorted(self.root, codes, ids, coords, 0, len(ids))
        self._ids.add(batch.ids)
        return self

    def delete(self, batch: PointSet) -> "SpacTree":
        """Delete points by id; each point's coordinates locate its key."""
        if len(batch) == 0:
            return self
        self._check_unique(batch.ids)
        here = self._ids.present(batch.ids)
        if not here.all():
            raise MissingPointError(int(batch.ids[np.argmin(here)]))
        codes, ids, _ = hybrid_sort(batch.coords, batch.ids, self.kind, self.bits)
        missing: list = []
        root = self._ops.delete_sorted(self.root, codes, ids, 0, len(ids), missing)
        if missing:
            bad = set(missing)
            raise MissingPointError(next(i for i in batch.ids.tolist() if i in bad))
        self.root = root
        self._ids.remove(batch.ids)
        return self

    # accessors ----------------------------------------------------------

    @property
    def size(self) -> int:
        return _size(self.root)

    def __len__(self) -> int:
        return self.size

    def height(self) -> int:
        def h(t):
            if t is None:
                return 0
            if t.is_leaf:
                return 1
            return 1 + max(h(t.left), h(t.right))
        return h(self.root)

    def height_bound(self) -> int:
        n, phi = self.size, self.params.phi
        if n <= phi:
            return 2
        return math.ceil(math.log(n / phi) / math.log(1 / (1 - self.params.alpha))) + 2

    def leaves(self) -> Iterator[SpacLeaf]:
        stack = [self.root]
        while stack:
            t = stack.pop()
            if t is None:
                continue
            if t.is_leaf:
                yield t
            else:
                stack.append(t.right)
                stack.append(t.left)

    def leaf_count(self) -> int:
        return sum(1 for _ in self.leaves())

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """In-order ``(codes, ids, coords)``; leaves contribute in stored order."""
        if self.root is None:
            return (np.zeros(0, np.uint64), np.zeros(0, np.int64), np.zeros((0, self.dims), np.int64))
        if self.root.is_leaf:
            t = self.root
            return t.codes, t.ids, t.coords
        parts: list = []
        self._ops._collect(self.root, parts)
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))

    def points(self) -> PointSet:
        _, ids, coords = self.entries()
        return PointSet._wrap(coords, ids)

    def canonicalize(self) -> "SpacTree":
        """Sort every leaf in place (the tree then matches a totally ordered one)."""
        for leaf in self.leaves():
            leaf.sort()
        return self

    def dump(self) -> list[tuple]:
        """Canonical in-order serialisation.

        Leaves: ``("leaf", key range, size, bbox, sorted flag, sorted keys)``;
        interior nodes: ``("interior", key range, size, bbox, pivot key)``.
        """
        out: list = []

        def walk(t):
            if t is None:
                return None
            if t.is_leaf:
                keys = sorted(zip(t.codes.tolist(), t.ids.tolist()))
                out.append(("leaf", (keys[0], keys[-1]), t.size, t.bbox, t.sorted, tuple(keys)))
                return keys[0], keys[-1]
            slot = len(out)
            out.append(None)
            lr = walk(t.left)
            pk = (t.pcode, t.pivot.id)
            rr = walk(t.right)
            rng = (lr[0] if lr else pk, rr[1] if rr else pk)
            out[slot] = ("interior", rng, t.size, t.bbox, pk)
            return rng

        walk(self.root)
        return out

    def audit(self) -> list[str]:
        """Check every structural invariant; returns human-readable violations."""
        errors: list[str] = []
        ops, phi = self._ops, self.params.phi

        def walk(t, path):
            # returns (size, bbox, min key, max key)
            if t.is_leaf:
                if not 1 <= t.size <= 2 * phi:
                    errors.append(f"{path}: leaf size {t.size} outside [1, {2 * phi}]")
                keys = list(zip(t.codes.tolist(), t.ids.tolist()))
                if t.sorted and keys != sorted(keys):
                    errors.append(f"{path}: leaf flagged sorted but is not")
                if t.bbox != box_of_array(t.coords):
                    errors.append(f"{path}: leaf bbox not tight")
                code_checks.append((path, t.coords, t.codes))
                return t.size, t.bbox, min(keys), max(keys)
            pk = (t.pcode, t.pivot.id)
            pc = t.pivot.coords
            code_checks.append((path, np.array([pc], dtype=np.int64),
                                np.array([t.pcode], dtype=np.uint64)))
            size, bbox, lo, hi = 1, Aabb(pc, pc), pk, pk
            for side, child in (("L", t.left), ("R", t.right)):
                if child is None:
                    continue
                s, b, cl, ch = walk(child, path + side)
                size += s
                bbox = box_merge(bbox, b)
                if side == "L":
                    if not ch < pk:
                        errors.append(f"{path}: left subtree key {ch} not below pivot {pk}")
                    lo = cl
                else:
                    if not cl > pk:
                        errors.append(f"{path}: right subtree key {cl} not above pivot {pk}")
                    hi = ch
            if size != t.size:
                errors.append(f"{path}: size {t.size} != {size}")
            if bbox != t.bbox:
                errors.append(f"{path}: bbox not tight")
            if size <= phi:
                errors.append(f"{path}: interior node of size {size} <= phi")
            wl, wr = _size(t.left) + 1, _size(t.right) + 1
            if not ops.balanced(wl, wr):
                errors.append(f"{path}: weights {wl}/{wr} violate alpha-balance")
            return size, bbox, lo, hi

        code_checks: list = []
        if self.root is not None:
            walk(self.root, "root:")
        if code_checks:
            got = encode_array(np.concatenate([c[1] for c in code_checks]), self.kind, self.bits)
            stored = np.concatenate([c[2] for c in code_checks])
            bad = np.nonzero(got != stored)[0]
            if len(bad):
                owner = np.repeat(np.arange(len(code_checks)), [len(c[2]) for c in code_checks])
                for j in np.unique(owner[bad]):
                    errors.append(f"{code_checks[j][0]} stored codes disagree with coordinates")
        if self.height() > self.height_bound():
            errors.append(f"height {self.height()} exceeds bound {self.height_bound()}")
        return errors


def build_sorted(points: PointSet, codes: np.ndarray, sorted_ids: np.ndarray,
                 params: SpacParams = SpacParams()):
    """Build a subtree from entries already sorted by ``(code, id)``.

    ``points`` is indexed by id (``points.ids[i] == i``); coordinates are
    fetched through ``sorted_ids``.
    """
    if len(codes) > 1:
        prev = list(zip(codes[:-1].tolist(), sorted_ids[:-1].tolist()))
        nxt = list(zip(codes[1:].tolist(), sorted_ids[1:].tolist()))
        if any(a >= b for a, b in zip(prev, nxt)):
            raise ValueError("entries are not strictly sorted by (code, id)")
    lookup = np.empty(int(points.ids.max()) + 1 if len(points) else 0, dtype=np.int64)
    lookup[points.ids] = np.arange(len(points))
    coords = points.coords[lookup[sorted_ids]] if len(sorted_ids) else points.coords[:0]
    return _Ops(params, points.dims).build_sorted(
        np.asarray(codes, dtype=np.uint64), np.asarray(sorted_ids, dtype=np.int64), coords)


def build_spac(points: PointSet, kind: SfcKind = SfcKind.HILBERT, **kwargs) -> SpacTree:
    return SpacTree.build(points, kind, **kwargs)


def batch_insert_spac(tree: SpacTree, batch: PointSet) -> SpacTree:
    return tree.insert(batch)


def batch_delete_spac(tree: SpacTree, batch: PointSet) -> SpacTree:
    return tree.delete(batch)


def expose(tree: SpacTree, node=None):
    """Expose ``node`` (default: the root) of ``tree`` as ``(left, entry, right)``."""
    node = tree.root if node is None else node
    if node is None:
        raise ValueError("cannot expose an empty tree")
    return tree._ops.expose(node)
