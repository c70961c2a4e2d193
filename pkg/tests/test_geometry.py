import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialtrees.geometry import (
    Aabb, Point, PointSet, Relation, box_extend, box_merge, box_of, box_of_array,
    box_relate, empty_box, is_empty, min_sq_dist_to_box, sq_dist, sq_dists,
)

coord = st.integers(-(2**31), 2**31)
pts2 = st.tuples(coord, coord)


@st.composite
def boxes(draw, dims=2, lo=-50, hi=50):
    a = [draw(st.integers(lo, hi)) for _ in range(dims)]
    b = [draw(st.integers(lo, hi)) for _ in range(dims)]
    return Aabb(tuple(map(min, a, b)), tuple(map(max, a, b)))


def test_sq_dist_examples():
    assert sq_dist(Point((5, 7)), Point((5, 7))) == 0
    assert sq_dist((0, 0), (3, 4)) == 25


def test_sq_dist_dimension_mismatch():
    with pytest.raises(ValueError):
        sq_dist((0, 0), (0, 0, 0))


@given(pts2, pts2)
def test_sq_dist_matches_naive_sum(p, q):
    naive = 0
    for d in range(2):
        naive += (p[d] - q[d]) ** 2
    assert sq_dist(p, q) == naive == sq_dist(q, p)
    assert (sq_dist(p, q) == 0) == (p == q)


def test_sq_dists_exact_at_extremes():
    coords = np.array([[0, 0, 0], [2**31 - 1] * 3, [2**40, 0, 5]], dtype=np.int64)
    q = (2**31 - 1, 0, 2**31 - 1)
    got = sq_dists(coords, q)
    assert [int(v) for v in got] == [sq_dist(c, q) for c in coords.tolist()]


def test_min_sq_dist_examples():
    b = Aabb((2, 2), (5, 5))
    assert min_sq_dist_to_box((3, 4), b) == 0
    assert min_sq_dist_to_box((0, 0), b) == 8
    with pytest.raises(ValueError):
        min_sq_dist_to_box((0, 0), empty_box(2))


@given(st.tuples(st.integers(-60, 60), st.integers(-60, 60)), boxes())
def test_min_sq_dist_is_clamp_and_lower_bound(p, b):
    clamped = tuple(min(max(x, lo), hi) for x, lo, hi in zip(p, b.lo, b.hi))
    d = min_sq_dist_to_box(p, b)
    assert d == sq_dist(p, clamped)
    rng = np.random.default_rng(abs(hash((p, b))) % 2**32)
    for _ in range(50):
        q = tuple(int(rng.integers(lo, hi + 1)) for lo, hi in zip(b.lo, b.hi))
        assert d <= sq_dist(p, q)


def test_box_relate_examples():
    a = Aabb((0, 0), (1, 1))
    assert box_relate(a, a) is Relation.A_CONTAINS_B
    assert box_relate(a, Aabb((2, 2), (3, 3))) is Relation.DISJOINT
    assert box_relate(a, empty_box(2)) is Relation.A_CONTAINS_B
    assert box_relate(empty_box(2), a) is Relation.DISJOINT


@given(boxes(lo=-6, hi=6), boxes(lo=-6, hi=6))
def test_box_relate_matches_grid_membership(a, b):
    cells_b = list(itertools.product(*[range(lo, hi + 1) for lo, hi in zip(b.lo, b.hi)]))
    inside = [all(lo <= x <= hi for x, lo, hi in zip(c, a.lo, a.hi)) for c in cells_b]
    if all(inside):
        want = Relation.A_CONTAINS_B
    elif any(inside):
        want = Relation.INTERSECTS
    else:
        want = Relation.DISJOINT
    assert box_relate(a, b) is want


def test_box_of_examples():
    assert box_of([Point((4, -2))]) == Aabb((4, -2), (4, -2))
    assert is_empty(box_of([], dims=3))
    x = Aabb((0, 1), (2, 3))
    assert box_merge(x, empty_box(2)) == x == box_merge(empty_box(2), x)


@given(st.lists(pts2, min_size=1, max_size=40))
def test_box_of_is_fold_of_min_max(ps):
    want = Aabb(tuple(min(p[d] for p in ps) for d in range(2)),
                tuple(max(p[d] for p in ps) for d in range(2)))
    assert box_of(ps) == want
    assert box_of_array(np.array(ps, dtype=np.int64)) == want
    b = empty_box(2)
    for p in ps:
        b = box_extend(b, p)
    assert b == want


@given(boxes(), boxes(), boxes())
def test_box_merge_lattice_laws(a, b, c):
    assert box_merge(a, b) == box_merge(b, a)
    assert box_merge(box_merge(a, b), c) == box_merge(a, box_merge(b, c))
    assert box_merge(a, a) == a
    assert box_merge(a, empty_box(2)) == a


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet.from_coords(np.zeros((3, 4), dtype=np.int64))
    ps = PointSet.from_coords([[1, 2], [3, 4]], start=10)
    assert ps.ids.tolist() == [10, 11]
    assert ps.point(1) == Point((3, 4), 11)
    assert ps.bbox() == Aabb((1, 2), (3, 4))
