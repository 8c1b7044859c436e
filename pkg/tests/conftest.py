import numpy as np
import pytest

from gnnpipe.graph import from_edge_list, synth_powerlaw

_criterion_lines: list[str] = []


def record_criterion(number: int, description: str, passed: bool) -> bool:
    """Collect one pass/fail line per acceptance criterion for the
    end-of-run summary; returns `passed` so callers can assert on it."""
    verdict = "PASS" if passed else "FAIL"
    _criterion_lines.append(f"criterion {number:2d}: {verdict}  {description}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not _criterion_lines:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in sorted(_criterion_lines):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_graph():
    """1000-node power-law graph shared by read-only tests."""
    return synth_powerlaw(1000, 5, 8, 4, seed=7)


@pytest.fixture
def path_graph():
    # 0 - 1 - 2
    return from_edge_list(3, [(0, 1), (1, 2)])


@pytest.fixture
def star_graph():
    """Center node 0 with 20 leaves."""
    return from_edge_list(21, [(0, i) for i in range(1, 21)])


def two_cliques(size: int = 6):
    """Two disconnected cliques of `size` nodes each."""
    edges = []
    for a in range(size):
        for b in range(a + 1, size):
            edges.append((a, b))
            edges.append((size + a, size + b))
    return from_edge_list(2 * size, edges)
