from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialtrees.geometry import Aabb, PointSet
from spatialtrees.sieve import (
    ClassificationError, Skeleton, child_cell, naive_partition, sieve, split_point,
)

from conftest import point_sets


def one_level(cell, p):
    """Single-level child index under the >= midpoint rule, independent of Skeleton."""
    child = 0
    for d, x in enumerate(p):
        lo, hi = cell.lo[d], cell.hi[d]
        if lo < hi and x >= lo + (hi - lo + 1) // 2:
            child |= 1 << d
    return child


def test_classify_hand_examples():
    sk = Skeleton(Aabb((0, 0), (100, 100)), 1)
    assert split_point(0, 100) == 50
    assert sk.classify((10, 10)) == 0
    assert sk.classify((60, 60)) == 3
    assert sk.classify((50, 50)) == 3
    assert sk.classify((50, 10)) == 1


def test_classify_outside_region_raises():
    sk = Skeleton(Aabb((0, 0), (9, 9)), 2)
    with pytest.raises(ClassificationError):
        sk.classify((10, 0))
    with pytest.raises(ClassificationError):
        sk.classify_many(np.array([[0, 0], [3, -1]]))


@pytest.mark.parametrize("dims,levels", [(2, 1), (2, 3), (3, 2)])
def test_classify_is_composed_single_levels(dims, levels):
    rng = np.random.default_rng(levels)
    region = Aabb((0,) * dims, (1000,) * dims)
    sk = Skeleton(region, levels)
    pts = rng.integers(0, 1001, size=(300, dims))
    vec = sk.classify_many(pts)
    for p, b in zip(pts.tolist(), vec.tolist()):
        cell, want = region, 0
        for _ in range(levels):
            c = one_level(cell, p)
            want = (want << dims) | c
            cell = child_cell(cell, c)
        assert sk.classify(p) == want == b


@pytest.mark.parametrize("dims,levels", [(2, 2), (3, 1), (2, 3)])
def test_bucket_cells_partition_region(dims, levels):
    region = Aabb((3,) * dims, (3 + 6,) * dims)   # 7 grid values per side: uneven splits
    sk = Skeleton(region, levels)
    cover = Counter()
    for cell in sk.bucket_cells:
        if cell is None:
            continue
        grids = np.stack(np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(cell.lo, cell.hi)],
                                     indexing="ij"), -1).reshape(-1, dims)
        cover.update(map(tuple, grids.tolist()))
    assert len(cover) == 7 ** dims and set(cover.values()) == {1}


def test_degenerate_dimension_forces_low_bit():
    sk = Skeleton(Aabb((5, 0), (5, 7)), 2)
    assert sk.classify((5, 7)) & 0b0101 == 0
    assert child_cell(Aabb((5, 0), (5, 7)), 1) is None


def test_sieve_trivial_cases():
    sk0 = Skeleton(Aabb((0, 0), (9, 9)), 0)
    ps = PointSet.from_coords(np.arange(10).reshape(5, 2))
    out = sieve(ps, sk0)
    assert out.offsets.tolist() == [0, 5] and ps.ids.tolist() == list(range(5))
    empty = sieve(PointSet.empty(2), Skeleton(Aabb((0, 0), (9, 9)), 2))
    assert empty.offsets.tolist() == [0] * 17


def check_sieve(ps, sk, **kw):
    ids_before = sorted(ps.ids.tolist())
    oracle = naive_partition(ps, sk)
    out = sieve(ps, sk, **kw)
    assert out.offsets[0] == 0 and out.offsets[-1] == len(ps)
    assert (np.diff(out.offsets) >= 0).all()
    assert sorted(ps.ids.tolist()) == ids_before
    for b in range(sk.n_buckets):
        part = out.slice(b)
        assert sorted(part.ids.tolist()) == sorted(oracle[b])
        assert all(sk.classify(c) == b for c in part.coords.tolist())


@pytest.mark.parametrize("chunk", [1, 64, None])
@pytest.mark.parametrize("workers", [1, 3])
def test_sieve_matches_naive_partition(chunk, workers):
    rng = np.random.default_rng(7)
    ps = PointSet.from_coords(rng.integers(0, 1 << 16, size=(3000, 2)))
    check_sieve(ps, Skeleton(Aabb((0, 0), ((1 << 16) - 1,) * 2), 3), chunk=chunk, workers=workers)


@given(point_sets(dims=3, side=9, max_size=200), st.integers(1, 2), st.sampled_from([1, 5, None]))
def test_sieve_property(ps, levels, chunk):
    check_sieve(ps, Skeleton(Aabb((0,) * 3, (8,) * 3), levels), chunk=chunk)


def test_sieve_slices_independent_of_chunk_and_workers():
    rng = np.random.default_rng(3)
    base = PointSet.from_coords(rng.integers(0, 500, size=(2000, 2)))
    sk = Skeleton(Aabb((0, 0), (499, 499)), 2)
    ref = None
    for chunk, workers in [(None, 1), (1, 1), (64, 2), (None, 4)]:
        ps = PointSet(base.coords.copy(), base.ids.copy())
        out = sieve(ps, sk, chunk=chunk, workers=workers)
        slices = [sorted(out.slice(b).ids.tolist()) for b in range(sk.n_buckets)]
        assert ref is None or slices == ref
        ref = slices
