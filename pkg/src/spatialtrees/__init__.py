"""Parallel-friendly spatial indexes for 2-d and 3-d integer points.

Two index families share one query layer:

* ``POrthTree``: a history-independent orth-tree (quadtree/octree) built and
  updated by sieving points through multi-level skeletons.
* ``SpacTree``: a weight-balanced search tree over Hilbert (SPaC-H) or
  Morton (SPaC-Z) codes with lazily sorted leaves and join-based batch updates.
"""

from .geometry import Aabb, Point, PointSet, Relation, box_relate, min_sq_dist_to_box, sq_dist
from .sfc import SfcKind, hilbert_decode, hilbert_encode, morton_encode
from .sieve import Skeleton, sieve
from .porth import POrthTree, batch_delete_orth, batch_insert_orth, build_orth
from .spac import SpacTree, batch_delete_spac, batch_insert_spac, build_spac
from .queries import KnnResult, knn, oracle_knn, oracle_range, range_count, range_list
from .datagen import Dataset, gen_sweepline, gen_uniform, gen_varden

__version__ = "0.1.0"

__all__ = [
    "Aabb", "Point", "PointSet", "Relation", "box_relate", "min_sq_dist_to_box", "sq_dist",
    "SfcKind", "hilbert_decode", "hilbert_encode", "morton_encode",
    "Skeleton", "sieve",
    "POrthTree", "build_orth", "batch_insert_orth", "batch_delete_orth",
    "SpacTree", "build_spac", "batch_insert_spac", "batch_delete_spac",
    "KnnResult", "knn", "oracle_knn", "oracle_range", "range_count", "range_list",
    "Dataset", "gen_uniform", "gen_sweepline", "gen_varden",
]
