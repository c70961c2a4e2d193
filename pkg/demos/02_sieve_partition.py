"""Distribute points into the cells of a multi-level skeleton in one pass."""
import numpy as np

from spatialtrees.geometry import Aabb, PointSet
from spatialtrees.sieve import Skeleton, naive_partition, sieve

rng = np.random.default_rng(0)
ps = PointSet.from_coords(rng.integers(0, 1024, size=(20, 2)))
skeleton = Skeleton(Aabb((0, 0), (1023, 1023)), 2)  # 4x4 cells

want = [sorted(x) for x in naive_partition(ps, skeleton)]
slices = sieve(ps, skeleton, chunk=4)  # permutes ps in place
for b in range(skeleton.n_buckets):
    part = slices.slice(b)
    if len(part):
        print(f"bucket {b:2d}: ids {sorted(part.ids.tolist())}")

print("matches per-point classification:", all(
    sorted(slices.slice(b).ids.tolist()) == want[b] for b in range(skeleton.n_buckets)))
