"""SPaC trees: Hilbert- and Morton-keyed weight-balanced trees under batch updates."""
import numpy as np

from spatialtrees.datagen import gen_varden
from spatialtrees.sfc import SfcKind
from spatialtrees.spac import SpacTree

ds = gen_varden(50_000, 2, seed=4)
ps = ds.points

for kind in (SfcKind.HILBERT, SfcKind.MORTON):
    t = SpacTree.build(ps[:25_000], kind)
    for a in range(25_000, 50_000, 2500):
        t.insert(ps[a:a + 2500])
    unsorted = sum(not leaf.sorted for leaf in t.leaves())
    t.delete(ps[::3])
    print(f"{kind.name.lower():8s} size={t.size} height={t.height()} bound={t.height_bound()} "
          f"unsorted leaves after inserts={unsorted} audit={t.audit() or 'clean'}")
