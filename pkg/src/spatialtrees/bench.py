"""Benchmark harness: dataset I/O, workload runner and the ``spatialtrees-bench`` CLI.

Dataset files use the PSIB layout (all little-endian)::

    offset 0   4 bytes   magic b"PSIB"
    offset 4   u16       version (1)
    offset 6   u16       dims
    offset 8   u64       count
    offset 16  i64[count*dims]  coordinates, row-major
    ...        i64[2*dims]      domain: lo[0..D), hi[0..D)

Reports are CSV rows ``index,workload,phase,seconds,n,height,extra``; one
row per executed phase. ``extra`` holds ``key=value`` pairs separated by
``;``.

Example::

    spatialtrees-bench inc-insert --index spac-h --n 100000 --batch-ratio 0.01 --audit
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import struct
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datagen import DISTRIBUTIONS, Dataset, dedup, default_domain, generate
from .geometry import Aabb, PointSet
from .porth import POrthTree
from .queries import knn, oracle_knn, oracle_range, range_count, range_list
from .sfc import SfcKind
from .spac import SpacTree
from ._parallel import resolve_workers, thread_map

__all__ = [
    "MAGIC",
    "VERSION",
    "CSV_HEADER",
    "INDEX_KINDS",
    "WORKLOADS",
    "DatasetFormatError",
    "BenchError",
    "AuditError",
    "WorkloadConfig",
    "Report",
    "write_dataset",
    "read_dataset",
    "make_index",
    "build_index",
    "run",
    "main",
]

MAGIC = b"PSIB"
VERSION = 1
CSV_HEADER = ("index", "workload", "phase", "seconds", "n", "height", "extra")
INDEX_KINDS = ("porth", "spac-h", "spac-z")
WORKLOADS = ("build", "inc-insert", "inc-delete", "query")
_HEADER = struct.Struct("<4sHHQ")


class DatasetFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BenchError(RuntimeError):
    def __init__(self, phase: str, message: str):
        super().__init__(f"[{phase}] {message}")
        self.phase = phase


class AuditError(BenchError):
    def __init__(self, phase: str, violations: Sequence[str]):
        super().__init__(phase, "invariant audit failed: " + "; ".join(violations[:5]))
        self.violations = list(violations)


# --------------------------------------------------------------------------
# dataset files
# --------------------------------------------------------------------------

def write_dataset(path, ds: Dataset) -> None:
    coords = np.ascontiguousarray(ds.points.coords, dtype="<i8")
    dom = np.array(list(ds.domain.lo) + list(ds.domain.hi), dtype="<i8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, ds.dims, len(coords)))
        f.write(coords.tobytes())
        f.write(dom.tobytes())


def read_dataset(path) -> Dataset:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DatasetFormatError(f"truncated header: {len(data)} of {_HEADER.size} bytes", len(data))
    magic, version, dims, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}", 4)
    if dims not in (2, 3):
        raise DatasetFormatError(f"unsupported dimensionality {dims}", 6)
    body = _HEADER.size + 8 * count * dims
    need = body + 16 * dims
    if len(data) < need:
        at = len(data) if len(data) < body else body
        what = "coordinates" if len(data) < body else "domain box"
        raise DatasetFormatError(f"truncated {what}: file has {len(data)} bytes, count={count} "
                                 f"and dims={dims} need {need}", at)
    if len(data) > need:
        raise DatasetFormatError(f"{len(data) - need} trailing bytes after domain box "
                                 f"(count={count}, dims={dims})", need)
    coords = np.frombuffer(data, dtype="<i8", count=count * dims, offset=_HEADER.size)
    coords = coords.reshape(count, dims).astype(np.int64)
    dom = np.frombuffer(data, dtype="<i8", count=2 * dims, offset=body).tolist()
    domain = Aabb(tuple(dom[:dims]), tuple(dom[dims:]))
    if count and ((coords < np.array(domain.lo)).any() or (coords > np.array(domain.hi)).any()):
        row = int(np.nonzero(((coords < np.array(domain.lo)) | (coords > np.array(domain.hi))).any(1))[0][0])
        raise DatasetFormatError(f"point {row} lies outside the domain box", _HEADER.size + 8 * row * dims)
    return Dataset(dims, domain, PointSet.from_coords(coords), 0, "file")


# --------------------------------------------------------------------------
# workloads
# --------------------------------------------------------------------------

@dataclass
class WorkloadConfig:
    """One benchmark run.

    ``range_size`` is the side of each range-query box as a fraction of
    the domain side. Queries are drawn in-distribution (sampled data
    points) unless ``ood`` is set, which draws them uniformly from the domain.
    """

    workload: str = "build"
    index: str = "spac-h"
    dims: int = 2
    n: int = 100_000
    dist: str = "uniform"
    input: Optional[str] = None
    batch_ratio: float = 0.01
    ks: tuple = (1, 10, 100)
    queries: int = 1000
    range_size: float = 0.01
    ood: bool = False
    threads: int = 1
    seed: int = 0
    audit: bool = False
    verify: bool = False
    dedup: bool = False
    repeat: int = 1
    csv: Optional[str] = None

    def validate(self) -> None:
        if self.workload not in WORKLOADS + ("gen",):
            raise BenchError("config", f"unknown workload {self.workload!r}")
        if self.index not in INDEX_KINDS:
            raise BenchError("config", f"unknown index {self.index!r}; expected one of {INDEX_KINDS}")
        if self.dist not in DISTRIBUTIONS:
            raise BenchError("config", f"unknown distribution {self.dist!r}")
        if not 0 < self.batch_ratio <= 1:
            raise BenchError("config", "batch ratio must lie in (0, 1]")
        if any(k < 1 for k in self.ks):
            raise BenchError("config", "every k must be at least 1")
        if self.n < 0 or self.queries < 0 or self.repeat < 1:
            raise BenchError("config", "n, queries and repeat must be non-negative (repeat >= 1)")
        if self.dims not in (2, 3):
            raise BenchError("config", "dims must be 2 or 3")


@dataclass
class Report:
    rows: list = field(default_factory=list)

    def add(self, index: str, workload: str, phase: str, seconds: float, n: int,
            height: int, **extra) -> None:
        self.rows.append({
            "index": index, "workload": workload, "phase": phase, "seconds": seconds,
            "n": n, "height": height,
            "extra": ";".join(f"{k}={v}" for k, v in extra.items()),
        })

    def phases(self) -> list[str]:
        return [r["phase"] for r in self.rows]

    def row(self, phase: str) -> dict:
        return next(r for r in self.rows if r["phase"] == phase)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({**r, "seconds": f"{r['seconds']:.6f}"})
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def make_index(kind: str, dims: int, domain: Aabb, workers: int = 1):
    if kind == "porth":
        return POrthTree(domain, workers=workers)
    if kind == "spac-h":
        return SpacTree(dims, SfcKind.HILBERT, workers=workers)
    if kind == "spac-z":
        return SpacTree(dims, SfcKind.MORTON, workers=workers)
    raise ValueError(f"unknown index kind {kind!r}")


def build_index(kind: str, points: PointSet, domain: Aabb, workers: int = 1):
    if kind == "porth":
        return POrthTree.build(points, domain, workers=workers)
    curve = {"spac-h": SfcKind.HILBERT, "spac-z": SfcKind.MORTON}.get(kind)
    if curve is None:
        raise ValueError(f"unknown index kind {kind!r}")
    return SpacTree.build(points, curve, workers=workers)


def load_dataset(cfg: WorkloadConfig) -> Dataset:
    try:
        if cfg.input:
            ds = read_dataset(cfg.input)
        else:
            ds = generate(cfg.dist, cfg.n, cfg.dims, default_domain(cfg.dims), cfg.seed)
    except (OSError, ValueError) as e:
        raise BenchError("load", str(e)) from e
    if cfg.dedup:
        ds = dedup(ds)
    return ds


def _query_set(cfg: WorkloadConfig, ds: Dataset, rng: np.random.Generator) -> np.ndarray:
    lo, hi = np.array(ds.domain.lo), np.array(ds.domain.hi)
    if cfg.ood or len(ds) == 0:
        return rng.integers(lo, hi + 1, size=(cfg.queries, ds.dims))
    return ds.points.coords[rng.integers(0, len(ds), size=cfg.queries)]


def _boxes(cfg: WorkloadConfig, ds: Dataset, centers: np.ndarray) -> list[Aabb]:
    lo, hi = np.array(ds.domain.lo), np.array(ds.domain.hi)
    half = np.maximum(((hi - lo) * cfg.range_size / 2).astype(np.int64), 0)
    blo = np.clip(centers - half, lo, hi)
    bhi = np.clip(centers + half, lo, hi)
    return [Aabb(tuple(a), tuple(b)) for a, b in zip(blo.tolist(), bhi.tolist())]


class _Runner:
    def __init__(self, cfg: WorkloadConfig, ds: Dataset, report: Report):
        self.cfg, self.ds, self.report = cfg, ds, report
        self.workers = resolve_workers(cfg.threads)
        self.peak_leaves = 0
        self.rng = np.random.default_rng(cfg.seed + 1)

    def emit(self, phase: str, seconds: float, tree, **extra) -> None:
        leaves = tree.leaf_count() if tree is not None else 0
        self.peak_leaves = max(self.peak_leaves, leaves)
        size = len(tree) if tree is not None else 0
        self.report.add(self.cfg.index, self.cfg.workload, phase, seconds, size,
                        tree.height() if tree is not None else 0,
                        leaves=leaves, peak_leaves=self.peak_leaves, **extra)

    def check(self, tree, phase: str) -> None:
        if self.cfg.audit:
            errs = tree.audit()
            if errs:
                raise AuditError(phase, errs)

    def batches(self, n: int) -> list[tuple[int, int]]:
        if n == 0:
            return []
        b = max(1, int(round(self.cfg.batch_ratio * n)))
        return [(a, min(a + b, n)) for a in range(0, n, b)]

    def updates(self, tree, op: str, spans, label: str):
        t0 = time.perf_counter()
        for i, (a, z) in enumerate(spans):
            batch = self.ds.points[a:z]
            try:
                getattr(tree, op)(batch)
            except (ValueError, KeyError) as e:
                raise BenchError(label, f"batch {i}: {e}") from e
            self.check(tree, f"{label} batch {i}")
        self.emit(label, time.perf_counter() - t0, tree, batches=len(spans))

    def queries(self, tree, stage: str) -> None:
        cfg = self.cfg
        centers = _query_set(cfg, self.ds, self.rng)
        tag = "ood" if cfg.ood or len(self.ds) == 0 else "ind"
        current = tree.points() if cfg.verify else None
        for k in cfg.ks:
            qs = [tuple(c) for c in centers.tolist()]
            t0 = time.perf_counter()
            res = thread_map(lambda q: knn(tree, q, k), qs, self.workers)
            dt = time.perf_counter() - t0
            extra = {"queries": len(qs), "qps": f"{len(qs) / dt:.1f}" if dt > 0 else "inf"}
            if cfg.verify:
                bad = sum(r.keys() != oracle_knn(current, q, k).keys() for r, q in zip(res, qs))
                if bad:
                    raise BenchError(f"{stage}-knn-k{k}", f"{bad} answers disagree with the oracle")
                extra["verified"] = "ok"
            self.emit(f"{stage}-knn-k{k}-{tag}", dt, tree, **extra)
        boxes = _boxes(cfg, self.ds, centers)
        for name, fn in (("range-count", range_count), ("range-list", range_list)):
            t0 = time.perf_counter()
            res = thread_map(lambda b: fn(tree, b), boxes, self.workers)
            dt = time.perf_counter() - t0
            total = sum(r if name == "range-count" else len(r) for r in res)
            extra = {"queries": len(boxes), "outputs": total}
            if cfg.verify:
                for r, b in zip(res, boxes):
                    want = sorted(p.id for p in oracle_range(current, b))
                    got = len(want) == r if name == "range-count" else sorted(p.id for p in r) == want
                    if not got:
                        raise BenchError(f"{stage}-{name}", f"answer for box {b} disagrees with the oracle")
                extra["verified"] = "ok"
            self.emit(f"{stage}-{name}-{tag}", dt, tree, **extra)

    def run(self) -> None:
        cfg, ds = self.cfg, self.ds
        n = len(ds)
        if cfg.workload in ("build", "query", "inc-delete"):
            t0 = time.perf_counter()
            try:
                tree = build_index(cfg.index, ds.points, ds.domain, self.workers)
            except ValueError as e:
                raise BenchError("build", str(e)) from e
            self.check(tree, "build")
            self.emit("build", time.perf_counter() - t0, tree)
            if cfg.workload == "build" and not cfg.verify:
                return
            if cfg.workload == "inc-delete":
                spans = self.batches(n)
                mid = math.ceil(len(spans) / 2)
                self.updates(tree, "delete", spans[:mid], "delete-first-half")
                self.queries(tree, "mid")
                self.updates(tree, "delete", spans[mid:], "delete-second-half")
            self.queries(tree, "final")
            return
        tree = make_index(cfg.index, ds.dims, ds.domain, self.workers)
        spans = self.batches(n)
        mid = math.ceil(len(spans) / 2)
        self.updates(tree, "insert", spans[:mid], "insert-first-half")
        self.queries(tree, "mid")
        self.updates(tree, "insert", spans[mid:], "insert-second-half")
        self.queries(tree, "final")


def run(cfg: WorkloadConfig, ds: Optional[Dataset] = None) -> Report:
    """Execute a workload; with ``repeat > 1`` a warm-up run precedes the averaged runs."""
    cfg.validate()
    t0 = time.perf_counter()
    if ds is None:
        ds = load_dataset(cfg)
    load_s = time.perf_counter() - t0
    if cfg.input is None:
        cfg = replace(cfg, dims=ds.dims)
    elif ds.dims != cfg.dims:
        cfg = replace(cfg, dims=ds.dims)
    runs = []
    for _ in range(cfg.repeat + (1 if cfg.repeat > 1 else 0)):
        rep = Report()
        rep.add(cfg.index, cfg.workload, "load", load_s, len(ds), 0, dist=ds.dist)
        _Runner(cfg, ds, rep).run()
        runs.append(rep)
    if cfg.repeat == 1:
        return runs[0]
    timed = runs[1:]
    out = timed[-1]
    for i, r in enumerate(out.rows):
        r["seconds"] = sum(t.rows[i]["seconds"] for t in timed) / len(timed)
    return out


# --------------------------------------------------------------------------
# command line
# --------------------------------------------------------------------------

def _ks(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k expects comma-separated integers, got {text!r}")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spatialtrees-bench",
                                description="Build, update and query P-Orth and SPaC trees.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dims", type=int, default=2, choices=(2, 3))
    common.add_argument("--n", type=int, default=100_000)
    common.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--dedup", action="store_true", help="drop repeated coordinates")
    gen = sub.add_parser("gen", parents=[common], help="write a synthetic dataset file")
    gen.add_argument("--out", required=True, help="PSIB output path")
    for name in WORKLOADS:
        w = sub.add_parser(name, parents=[common], help=f"run the {name} workload")
        w.add_argument("--input", help="PSIB dataset file (overrides --n/--dist/--dims)")
        w.add_argument("--index", choices=INDEX_KINDS, default="spac-h")
        w.add_argument("--batch-ratio", type=float, default=0.01)
        w.add_argument("--k", type=_ks, default=(1, 10, 100))
        w.add_argument("--queries", type=int, default=1000)
        w.add_argument("--range-size", type=float, default=0.01,
                       help="range box side as a fraction of the domain side")
        w.add_argument("--ood", action="store_true", help="draw queries uniformly from the domain")
        w.add_argument("--threads", type=int, default=1, help="<= 0 uses every core")
        w.add_argument("--audit", action="store_true", help="audit invariants after every batch")
        w.add_argument("--verify", action="store_true", help="check query answers against the oracle")
        w.add_argument("--repeat", type=int, default=1)
        w.add_argument("--csv", metavar="PATH", help="write the report here instead of stdout")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "gen":
            cfg = WorkloadConfig(workload="gen", dims=args.dims, n=args.n, dist=args.dist,
                                 seed=args.seed, dedup=args.dedup)
            ds = load_dataset(cfg)
            write_dataset(args.out, ds)
            print(f"wrote {len(ds)} {ds.dist} points (D={ds.dims}) to {args.out}", file=sys.stderr)
            return 0
        cfg = WorkloadConfig(
            workload=args.command, index=args.index, dims=args.dims, n=args.n, dist=args.dist,
            input=args.input, batch_ratio=args.batch_ratio, ks=args.k, queries=args.queries,
            range_size=args.range_size, ood=args.ood, threads=args.threads, seed=args.seed,
            audit=args.audit, verify=args.verify, dedup=args.dedup, repeat=args.repeat,
            csv=args.csv)
        report = run(cfg)
    except BenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if cfg.csv:
        report.write_csv(cfg.csv)
    else:
        sys.stdout.write(report.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
