import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from spatialtrees.geometry import Aabb, PointSet

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, n, dims=2, side=1 << 20, start=0):
    return PointSet.from_coords(rng.integers(0, side, size=(n, dims)), start=start)


def full_region(dims, side):
    return Aabb((0,) * dims, (side - 1,) * dims)


@st.composite
def point_sets(draw, dims=2, side=64, min_size=0, max_size=300):
    """Small integer point sets; a tiny side forces duplicates and degenerate cells."""
    n = draw(st.integers(min_size, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    coords = np.random.default_rng(seed).integers(0, side, size=(n, dims))
    return PointSet.from_coords(coords)


def random_schedule(rng, final: PointSet, extra: PointSet, batch: int):
    """Mixed insert/delete batches whose net effect is inserting exactly ``final``.

    Every point of ``extra`` is inserted at some step and deleted at a later one.
    Yields ``("insert" | "delete", PointSet)``.
    """
    pending = PointSet.concat([final, extra], final.dims)
    pending = pending[rng.permutation(len(pending))]
    extra_ids = set(extra.ids.tolist())
    live_extra: list = []
    pos = 0
    while pos < len(pending) or live_extra:
        if live_extra and (pos >= len(pending) or rng.random() < 0.35):
            take = min(len(live_extra), int(rng.integers(1, batch + 1)))
            idx = rng.choice(len(live_extra), size=take, replace=False)
            chosen = [live_extra[i] for i in idx]
            for i in sorted(idx, reverse=True):
                live_extra.pop(i)
            yield "delete", PointSet.concat(chosen, final.dims)
            continue
        part = pending[pos:pos + batch]
        pos += len(part)
        live_extra.extend(part[i:i + 1] for i in range(len(part)) if int(part.ids[i]) in extra_ids)
        yield "insert", part


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
