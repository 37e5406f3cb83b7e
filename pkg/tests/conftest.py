from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from causalorder.bn import bundled_graph
from causalorder.graph import AdjacencyMatrix, VariableSet


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    verdict = "PASS" if report.passed else "FAIL"
    name = report.nodeid.split("::", 1)[1]
    sys.stderr.write(f"[acceptance] {verdict}: {name}\n")
    sys.stderr.flush()


@pytest.fixture(scope="session")
def cancer():
    return bundled_graph("cancer")


@pytest.fixture(scope="session")
def asia():
    return bundled_graph("asia")


@pytest.fixture(scope="session")
def earthquake():
    return bundled_graph("earthquake")


@pytest.fixture
def chain3():
    variables = VariableSet(("A", "B", "C"))
    return AdjacencyMatrix.from_edges(variables, [("A", "B"), ("B", "C")])


@pytest.fixture
def collider3():
    variables = VariableSet(("A", "B", "C"))
    return AdjacencyMatrix.from_edges(variables, [("A", "C"), ("B", "C")])
