import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from specsparse import WeightedGraph

# where the real benchmark datasets live, if retrieved (see README)
DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def c4():
    return WeightedGraph.from_edges(
        4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]
    )


@pytest.fixture
def p3():
    return WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def k4():
    return WeightedGraph.from_edges(
        4,
        [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)],
    )


@pytest.fixture
def two_cliques_weak():
    """Two 5-cliques joined by one w=1e-6 edge; ideal two-block structure."""
    edges = []
    for base in (0, 5):
        for i in range(5):
            for j in range(i + 1, 5):
                edges.append((base + i, base + j, 1.0))
    edges.append((0, 5, 1e-6))
    truth = np.array([0] * 5 + [1] * 5)
    return WeightedGraph.from_edges(10, edges), truth


# ---------------------------------------------------------------------------
# acceptance reporting: one pass/fail line per criterion at session end
# ---------------------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def record_acceptance(criterion: str, passed: bool, note: str = ""):
    ACCEPTANCE_RESULTS[criterion] = (passed, note)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        passed, note = ACCEPTANCE_RESULTS[name]
        status = "PASS" if passed else "FAIL"
        line = f"{name}: {status}"
        if note:
            line += f"  ({note})"
        terminalreporter.write_line(line)
