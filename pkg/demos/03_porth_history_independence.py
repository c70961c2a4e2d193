"""A P-Orth tree's shape depends only on its final point set.

Builds the same final set directly and through a noisy insert/delete
history, then compares the two structural dumps.
"""
import numpy as np

from spatialtrees.datagen import gen_uniform
from spatialtrees.porth import POrthTree

ds = gen_uniform(12_000, 2, seed=3)
final, noise = ds.points[:10_000], ds.points[10_000:]

direct = POrthTree.build(final, ds.domain)

t = POrthTree(ds.domain)
t.insert(noise)
for a in range(0, 10_000, 1000):
    t.insert(final[a:a + 1000])
t.delete(noise)

print("size", t.size, "height", t.height(), "bound", t.height_bound(), "leaves", t.leaf_count())
print("identical structure:", t.dump() == direct.dump())
print("audit violations:", t.audit())
