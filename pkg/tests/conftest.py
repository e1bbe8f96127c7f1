import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qglt.graph import EdgePotential, PotentialField, StarGraph  # noqa: E402


def random_profile(rng, max_segments=3, depth_max=50.0, unit=0.1, max_units=10, positive_prob=0.15,
                   min_segments=0):
    """Step profile with grid-aligned segment lengths (multiples of ``unit``)."""
    k = int(rng.integers(min_segments, max_segments + 1))
    segs = []
    for _ in range(k):
        length = unit * int(rng.integers(1, max_units + 1))
        if rng.random() < positive_prob:
            v = rng.uniform(0.0, 5.0)
        else:
            v = -rng.uniform(0.0, 1.0) * np.exp(rng.uniform(np.log(0.1), np.log(depth_max)))
        segs.append((length, v))
    return EdgePotential(segs)


def random_field(rng, n_edges, **kw):
    return PotentialField(StarGraph(n_edges), tuple(random_profile(rng, **kw) for _ in range(n_edges)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
