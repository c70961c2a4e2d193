"""k-NN and range queries on all three index families, checked against a linear scan."""
import numpy as np

from spatialtrees.datagen import gen_sweepline
from spatialtrees.geometry import Aabb
from spatialtrees.porth import POrthTree
from spatialtrees.queries import knn, oracle_knn, oracle_range, range_count, range_list
from spatialtrees.sfc import SfcKind
from spatialtrees.spac import SpacTree

ds = gen_sweepline(20_000, 2, seed=5)
trees = {
    "p-orth": POrthTree.build(ds.points, ds.domain),
    "spac-h": SpacTree.build(ds.points, SfcKind.HILBERT),
    "spac-z": SpacTree.build(ds.points, SfcKind.MORTON),
}
q = (500_000_000, 500_000_000)
box = Aabb((400_000_000, 0), (420_000_000, 10**9))

want = oracle_knn(ds.points, q, 10)
print("10-NN ids (scan):", want.ids)
for name, t in trees.items():
    pruned = []
    got = knn(t, q, 10, on_prune=pruned.append)
    print(f"{name}: knn agrees={got.keys() == want.keys()} pruned subtrees={len(pruned)} "
          f"range count={range_count(t, box)} "
          f"list agrees={sorted(p.id for p in range_list(t, box)) == sorted(p.id for p in oracle_range(ds.points, box))}")
