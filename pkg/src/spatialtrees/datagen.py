"""Deterministic synthetic point sets: uniform, sweepline and varden.

Every generator takes an explicit seed. Uniform points come from Philox
counter-based streams keyed by ``(seed, block)``, so each fixed-size block
of rows is reproducible on its own and the output does not depend on how
many threads produced it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Aabb, PointSet
from ._parallel import thread_map

__all__ = [
    "Dataset",
    "default_domain",
    "gen_uniform",
    "gen_sweepline",
    "gen_varden",
    "generate",
    "dedup",
    "DISTRIBUTIONS",
]

DISTRIBUTIONS = ("uniform", "sweepline", "varden")

_MAX_SIDE = {2: 10**9, 3: 10**6}
_BLOCK = 1 << 16
_MASK64 = (1 << 64) - 1


@dataclass
class Dataset:
    dims: int
    domain: Aabb
    points: PointSet
    seed: int = 0
    dist: str = "uniform"

    def __len__(self) -> int:
        return len(self.points)

    def __post_init__(self):
        if self.points.dims != self.dims:
            raise ValueError("point dimensionality does not match dims")


def default_domain(dims: int) -> Aabb:
    """``[0, 10**9]^2`` in 2-d and ``[0, 10**6]^3`` in 3-d."""
    if dims not in _MAX_SIDE:
        raise ValueError(f"only 2-d and 3-d data is supported, got D={dims}")
    return Aabb((0,) * dims, (_MAX_SIDE[dims],) * dims)


def _check_domain(dims: int, domain: Optional[Aabb]) -> Aabb:
    domain = default_domain(dims) if domain is None else domain
    if len(domain.lo) != dims:
        raise ValueError("domain dimensionality does not match dims")
    if min(domain.lo) < 0:
        raise ValueError("domain coordinates must be non-negative")
    if max(domain.hi) > _MAX_SIDE[dims]:
        raise ValueError(f"domain upper bound exceeds {_MAX_SIDE[dims]} for D={dims}")
    if any(lo > hi for lo, hi in zip(domain.lo, domain.hi)):
        raise ValueError("domain is empty")
    return domain


def _stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, block]))


def _uniform_rows(n: int, domain: Aabb, seed: int, workers: int = 1) -> np.ndarray:
    dims = len(domain.lo)
    lo = np.array(domain.lo, dtype=np.int64)
    hi = np.array(domain.hi, dtype=np.int64) + 1
    out = np.empty((n, dims), dtype=np.int64)

    def fill(b):
        a = b * _BLOCK
        rows = min(_BLOCK, n - a)
        out[a:a + rows] = _stream(seed, b).integers(lo, hi, size=(rows, dims))

    thread_map(fill, range(-(-n // _BLOCK)), workers)
    return out


def gen_uniform(n: int, dims: int = 2, domain: Optional[Aabb] = None, seed: int = 0,
                workers: int = 1) -> Dataset:
    """i.i.d. uniform integer points in the closed domain box."""
    if n < 0:
        raise ValueError("n must be non-negative")
    domain = _check_domain(dims, domain)
    coords = _uniform_rows(n, domain, seed, workers)
    return Dataset(dims, domain, PointSet.from_coords(coords), seed, "uniform")


def gen_sweepline(n: int, dims: int = 2, domain: Optional[Aabb] = None, seed: int = 0,
                  workers: int = 1) -> Dataset:
    """Uniform points stably sorted by the first coordinate, ids renumbered in that order."""
    ds = gen_uniform(n, dims, domain, seed, workers)
    coords = ds.points.coords
    coords = coords[np.argsort(coords[:, 0], kind="stable")]
    return Dataset(dims, ds.domain, PointSet.from_coords(coords), seed, "sweepline")


def _walk_segment(out: np.ndarray, start: np.ndarray, steps: np.ndarray,
                  lo: np.ndarray, hi: np.ndarray) -> None:
    """Write ``start, start+s1, ...`` into ``out`` clamping to ``[lo, hi]`` after every step."""
    out[0] = start
    i, cur = 1, start
    m = len(out)
    while i < m:
        path = cur + np.cumsum(steps[i:m], axis=0)
        bad = ((path < lo) | (path > hi)).any(axis=1)
        if not bad.any():
            out[i:m] = path
            return
        j = int(np.argmax(bad))
        out[i:i + j] = path[:j]
        cur = np.clip(path[j], lo, hi)
        out[i + j] = cur
        i += j + 1


def gen_varden(n: int, dims: int = 2, domain: Optional[Aabb] = None, seed: int = 0,
               restart_prob: float = 1e-3, step: Optional[int] = None) -> Dataset:
    """Clustered points from a clamped random walk that occasionally restarts.

    Each move adds an independent uniform integer in ``[-step, step]`` per
    dimension and clamps to the domain; with probability ``restart_prob`` the
    walk instead jumps to a uniform position. ``step`` defaults to the
    domain side divided by ``10**4``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0 < restart_prob <= 1:
        raise ValueError("restart_prob must lie in (0, 1]")
    domain = _check_domain(dims, domain)
    lo = np.array(domain.lo, dtype=np.int64)
    hi = np.array(domain.hi, dtype=np.int64)
    if step is None:
        step = max(1, int((hi - lo).max()) // 10**4)
    if step <= 0:
        raise ValueError("step must be positive")
    coords = np.empty((n, dims), dtype=np.int64)
    if n:
        rng = _stream(seed, 1 << 63)
        restart = rng.random(n) < restart_prob
        restart[0] = True
        starts = np.nonzero(restart)[0]
        jumps = rng.integers(lo, hi + 1, size=(len(starts), dims))
        steps = rng.integers(-step, step + 1, size=(n, dims))
        bounds = np.append(starts, n)
        for s in range(len(starts)):
            a, b = int(bounds[s]), int(bounds[s + 1])
            _walk_segment(coords[a:b], jumps[s], steps[a:b], lo, hi)
    return Dataset(dims, domain, PointSet.from_coords(coords), seed, "varden")


def generate(dist: str, n: int, dims: int = 2, domain: Optional[Aabb] = None, seed: int = 0,
             **kwargs) -> Dataset:
    if dist == "uniform":
        return gen_uniform(n, dims, domain, seed, **kwargs)
    if dist == "sweepline":
        return gen_sweepline(n, dims, domain, seed, **kwargs)
    if dist == "varden":
        return gen_varden(n, dims, domain, seed, **kwargs)
    raise ValueError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")


def dedup(ds: Dataset) -> Dataset:
    """Drop repeated coordinates (first occurrence wins) and renumber ids 0..n-1."""
    coords = ds.points.coords
    if len(coords) == 0:
        return ds
    _, first = np.unique(coords, axis=0, return_index=True)
    keep = np.sort(first)
    return Dataset(ds.dims, ds.domain, PointSet.from_coords(coords[keep]), ds.seed, ds.dist)
