"""Morton and Hilbert codes on a small grid.

Prints the visiting order of an 8x8 grid under both curves. The Hilbert
walk only ever moves to an edge-adjacent cell; Morton jumps.
"""
import itertools

import numpy as np

from spatialtrees.sfc import hilbert_encode_array, morton_encode_array

grid = np.array(list(itertools.product(range(8), repeat=2)))

for name, codes in (("morton", morton_encode_array(grid, bits=3)),
                    ("hilbert", hilbert_encode_array(grid, bits=3))):
    board = np.zeros((8, 8), dtype=int)
    board[grid[:, 1], grid[:, 0]] = codes
    walk = grid[np.argsort(codes)]
    jumps = int((np.abs(np.diff(walk, axis=0)).sum(axis=1) > 1).sum())
    print(f"{name} order (row y, column x), {jumps} non-adjacent steps:")
    print(board[::-1])
    print()
