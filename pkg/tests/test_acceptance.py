"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also repeated in the terminal summary. The performance criterion needs at
least 8 hardware threads; on smaller machines it reports SKIP with the reason
and prints a desk-scale informational measurement instead. Set
``SPATIALTREES_FULL_PERF=1`` to force the full-size run regardless.
"""

import os
import time

import numpy as np
import pytest

from spatialtrees._parallel import available_workers
from spatialtrees.datagen import gen_sweepline, gen_uniform, gen_varden
from spatialtrees.geometry import Aabb, PointSet
from spatialtrees.porth import POrthTree
from spatialtrees.queries import knn, oracle_knn, oracle_range, range_count, range_list
from spatialtrees.sfc import SfcKind, hilbert_decode_array, hilbert_encode_array, morton_encode_array
from spatialtrees.sieve import Skeleton, naive_partition, sieve
from spatialtrees.spac import SpacTree

from conftest import random_schedule

RESULTS: list = []

GENERATORS = {"uniform": gen_uniform, "sweepline": gen_sweepline, "varden": gen_varden}
KINDS = {"spac-h": SfcKind.HILBERT, "spac-z": SfcKind.MORTON}


def record(label: str, ok, detail: str) -> None:
    status = {True: "PASS", False: "FAIL"}.get(ok, ok)
    line = f"[{status}] criterion {label}: {detail}"
    RESULTS.append(line)
    print(line)


def build_family(name, ps, domain, workers=1):
    if name == "porth":
        return POrthTree.build(ps, domain, workers=workers)
    return SpacTree.build(ps, KINDS[name], workers=workers)


def empty_family(name, dims, domain):
    if name == "porth":
        return POrthTree(domain)
    return SpacTree(dims, KINDS[name])


def boxes_with_output(ps, rng, count, lo=10, hi=1000):
    """Boxes around data points sized (by an L-inf rank) to hold lo..hi points."""
    boxes = []
    while len(boxes) < count:
        c = ps.coords[rng.integers(len(ps))]
        target = int(np.exp(rng.uniform(np.log(lo), np.log(hi * 0.9))))
        r = int(np.sort(np.abs(ps.coords - c).max(axis=1))[target - 1])
        box = Aabb(tuple((c - r).tolist()), tuple((c + r).tolist()))
        if lo <= len(oracle_range(ps, box)) <= hi:
            boxes.append(box)
    return boxes


# --------------------------------------------------------------------------


def test_c1_oracle_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    mismatches, checked = 0, 0
    for dist, gen in GENERATORS.items():
        ds = gen(10**4, 2, seed=11)
        ps = ds.points
        lo, hi = np.array(ds.domain.lo), np.array(ds.domain.hi)
        trees = {name: build_family(name, ps, ds.domain) for name in ("porth", "spac-h", "spac-z")}
        queries = np.concatenate([ps.coords[rng.integers(0, len(ps), 1000)],
                                  rng.integers(lo, hi + 1, size=(1000, 2))]).tolist()
        for q in queries:
            want = oracle_knn(ps, q, 100).keys()
            for t in trees.values():
                for k in (1, 10, 100):
                    checked += 1
                    mismatches += knn(t, q, k).keys() != want[:k]
        for box in boxes_with_output(ps, rng, 1000):
            want = sorted(p.id for p in oracle_range(ps, box))
            for t in trees.values():
                checked += 2
                mismatches += range_count(t, box) != len(want)
                mismatches += sorted(p.id for p in range_list(t, box)) != want
    dt = time.perf_counter() - t0
    record("1 (oracle exactness)", mismatches == 0,
           f"{mismatches} mismatches over {checked} query answers, {dt:.1f}s")
    assert mismatches == 0


def test_c2_porth_history_independence():
    rng = np.random.default_rng(2)
    n = 10**4
    ds = gen_uniform(n + 2000, 2, seed=22)
    final, extra = ds.points[:n], ds.points[n:]
    ref = POrthTree.build(final, ds.domain).dump()
    differing = 0
    for _ in range(20):
        t = POrthTree(ds.domain)
        for op, batch in random_schedule(rng, final, extra, n // 100):
            getattr(t, op)(batch)
        differing += t.dump() != ref
    record("2 (P-Orth history independence)", differing == 0,
           f"{differing}/20 schedules differ from the direct build")
    assert differing == 0


def test_c3_spac_invariant_audit():
    violations, details = [], []
    n = 10**5
    for dist in ("uniform", "sweepline"):
        ps = GENERATORS[dist](n, 2, seed=33).points
        for name, kind in KINDS.items():
            t = SpacTree(2, kind)
            b = n // 100
            for i in range(100):
                t.insert(ps[i * b:(i + 1) * b])
                if i % 25 == 24:
                    violations += t.audit()
            order = np.random.default_rng(3).permutation(n)
            for i in range(50):
                t.delete(ps[order[i * b:(i + 1) * b]])
                if i % 25 == 24:
                    violations += t.audit()
            details.append(f"{name}/{dist} h={t.height()}")
    record("3 (SPaC invariant audit)", not violations,
           f"{len(violations)} violations ({', '.join(details)})")
    assert not violations


def test_c4_build_insert_equivalence():
    rng = np.random.default_rng(4)
    mismatches = 0
    for pair in range(50):
        kind = list(KINDS.values())[pair % 2]
        ds = gen_uniform(10**4, 2, seed=400 + pair)
        a, b = ds.points[:5000], ds.points[5000:]
        inc = SpacTree.build(a, kind).insert(b).canonicalize()
        ref = SpacTree.build(ds.points, kind).canonicalize()
        if inc.audit() or sorted(inc.entries()[1].tolist()) != sorted(ref.entries()[1].tolist()):
            mismatches += 1
            continue
        qs = rng.integers(0, 10**9 + 1, size=(100, 2)).tolist()
        for q in qs:
            k = int(rng.choice([1, 10, 100]))
            mismatches += knn(inc, q, k).keys() != knn(ref, q, k).keys()
        for q in qs:
            half = int(rng.integers(10**6, 10**8))
            box = Aabb((q[0] - half, q[1] - half), (q[0] + half, q[1] + half))
            if q[0] % 2:
                mismatches += range_count(inc, box) != range_count(ref, box)
            else:
                mismatches += sorted(p.id for p in range_list(inc, box)) != sorted(p.id for p in range_list(ref, box))
    record("4 (build/insert equivalence)", mismatches == 0,
           f"{mismatches} mismatches over 50 pairs x 200 queries")
    assert mismatches == 0


def _interleave(c, bits):
    code = 0
    for i in range(bits):
        for d in range(len(c)):
            code |= ((c[d] >> i) & 1) << (i * len(c) + d)
    return code


def test_c5_sfc_correctness():
    bad = 0
    rng = np.random.default_rng(5)
    for dims, bits in ((2, 32), (3, 21)):
        coords = rng.integers(0, 1 << bits, size=(10**4, dims))
        got = morton_encode_array(coords).tolist()
        bad += sum(g != _interleave(c, bits) for g, c in zip(got, coords.tolist()))
    import itertools
    for dims, orders in ((2, range(1, 7)), (3, range(1, 5))):
        for order in orders:
            g = np.array(list(itertools.product(range(1 << order), repeat=dims)))
            codes = hilbert_encode_array(g, bits=order)
            bad += int(sorted(codes.tolist()) != list(range(1 << (order * dims))))
            walk = g[np.argsort(codes)]
            bad += int((np.abs(np.diff(walk, axis=0)).sum(axis=1) != 1).sum())
            bad += int((hilbert_decode_array(codes, dims, order) != g).any())
    record("5 (SFC correctness)", bad == 0, f"{bad} violations")
    assert bad == 0


def test_c6_structural_bounds():
    bad, seen = [], 0
    for dist, gen in GENERATORS.items():
        for dims in (2, 3):
            ds = gen(3 * 10**4, dims, seed=6)
            t = POrthTree.build(ds.points, ds.domain)
            seen += 1
            if t.height() > t.height_bound():
                bad.append(f"porth {dist} D={dims}: {t.height()} > {t.height_bound()}")
            small = POrthTree.build(ds.points[:5000], ds.domain, phi=1)
            seen += 1
            if small.height() > small.height_bound():
                bad.append(f"porth phi=1 {dist} D={dims}")
    dup = PointSet.from_coords(np.repeat(np.array([[5, 5], [6, 5], [1000, 1000]]), 500, axis=0))
    t = POrthTree.build(dup, Aabb((0, 0), (1023, 1023)), phi=4)
    seen += 1
    if t.height() > t.height_bound():
        bad.append("porth duplicates")
    rng = np.random.default_rng(6)
    for dist, gen in GENERATORS.items():
        ps = gen(4 * 10**4, 2, seed=61).points
        for name, kind in KINDS.items():
            t = SpacTree(2, kind)
            for a in range(0, len(ps), 400):
                t.insert(ps[a:a + 400])
            t.delete(ps[rng.permutation(len(ps))[:20_000]])
            seen += 1
            if t.audit() or t.height() > t.height_bound():
                bad.append(f"{name} {dist}: h={t.height()} bound={t.height_bound()}")
    record("6 (structural bounds)", not bad, f"{len(bad)} violations over {seen} trees {bad[:3]}")
    assert not bad


def test_c7_determinism_across_parallelism():
    top = max(available_workers(), 4)
    ds = gen_varden(2 * 10**5, 2, seed=7)
    ps, extra = ds.points[:150_000], ds.points[150_000:]
    differing = []
    for name in ("porth", "spac-h", "spac-z"):
        dumps = []
        for w in (1, top):
            t = build_family(name, ps, ds.domain, workers=w)
            built = t.dump()
            for a in range(0, len(extra), 5000):
                t.insert(extra[a:a + 5000])
            t.delete(ps[:20_000])
            dumps.append((built, t.dump()))
        if dumps[0] != dumps[1]:
            differing.append(name)
    record("7 (determinism across parallelism)", not differing,
           f"threads 1 vs {top}: differing families {differing or 'none'}")
    assert not differing


def _insert_vs_rebuild(n, seed=8):
    ds = gen_uniform(n, 2, seed=seed)
    b = max(1, n // 10**4)
    base = n - 100 * b
    t = SpacTree.build(ds.points[:base], SfcKind.HILBERT)
    t0 = time.perf_counter()
    for i in range(100):
        t.insert(ds.points[base + i * b:base + (i + 1) * b])
    inc = time.perf_counter() - t0
    t0 = time.perf_counter()
    for i in range(100):
        SpacTree.build(ds.points[:base + (i + 1) * b], SfcKind.HILBERT)
    reb = time.perf_counter() - t0
    return inc, reb


def _build_speedup(name, n, workers):
    ds = gen_uniform(n, 2, seed=81)
    times = []
    for w in (1, workers):
        t0 = time.perf_counter()
        build_family(name, ds.points, ds.domain, workers=w)
        times.append(time.perf_counter() - t0)
    return times[0] / times[1]


@pytest.mark.slow
def test_c8_performance_smoke():
    threads = available_workers()
    forced = os.environ.get("SPATIALTREES_FULL_PERF") == "1"
    if threads >= 8 or forced:
        n = 10**7
        speedups = {name: _build_speedup(name, n, threads) for name in ("porth", "spac-h", "spac-z")}
        ok_a = all(s >= 3 for s in speedups.values())
        record("8a (parallel build speedup)", ok_a,
               ", ".join(f"{k} {v:.2f}x" for k, v in speedups.items()) + f" on {threads} threads")
        inc, reb = _insert_vs_rebuild(n)
        ok_b = inc <= 0.5 * reb
        record("8b (incremental vs rebuild)", ok_b,
               f"inserts {inc:.1f}s vs rebuilds {reb:.1f}s, ratio {inc / reb:.4f} (threshold 0.5)")
        assert ok_a and ok_b
        return
    reason = f"needs >= 8 hardware threads, this machine has {threads}"
    record("8a (parallel build speedup)", "SKIP", reason)
    record("8b (incremental vs rebuild)", "SKIP", reason + " (n=1e7 scale not run)")
    inc, reb = _insert_vs_rebuild(2 * 10**5)
    RESULTS.append(f"[INFO] criterion 8b desk-scale shadow, n=2e5 single-threaded: "
                   f"100 insert batches {inc:.2f}s vs 100 rebuilds {reb:.2f}s, ratio {inc / reb:.4f}")
    print(RESULTS[-1])
    pytest.skip(reason)


def test_c9_sieve_contract():
    rng = np.random.default_rng(9)
    side = 1 << 20
    base = PointSet.from_coords(rng.integers(0, side, size=(10**5, 2)))
    region = Aabb((0, 0), (side - 1, side - 1))
    bad = 0
    for levels in (1, 2, 3):
        sk = Skeleton(region, levels)
        oracle = [sorted(b) for b in naive_partition(base, sk)]
        for chunk in (1, 64, None):
            ps = PointSet(base.coords.copy(), base.ids.copy())
            out = sieve(ps, sk, chunk=chunk, workers=2)
            bad += int(sorted(ps.ids.tolist()) != list(range(10**5)))
            lookup = dict(zip(ps.ids.tolist(), map(tuple, ps.coords.tolist())))
            bad += int(any(lookup[i] != tuple(base.coords[i]) for i in range(0, 10**5, 997)))
            for b in range(sk.n_buckets):
                bad += int(sorted(out.slice(b).ids.tolist()) != oracle[b])
    record("9 (sieve contract)", bad == 0, f"{bad} violations over 9 (chunk, levels) settings")
    assert bad == 0
