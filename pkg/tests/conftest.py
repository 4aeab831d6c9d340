import numpy as np
import pytest

from qpmp.quantum import random_density_matrix

SEED = 20240611

_REPORT = []


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def random_pairs():
    """Deterministic (rho, sigma) pairs; 200 per dimension."""
    gen = np.random.default_rng(SEED + 1)

    def make(dim, count=200):
        return [(random_density_matrix(dim, gen), random_density_matrix(dim, gen)) for _ in range(count)]

    return make


@pytest.fixture
def acceptance_report():
    """Collects one pass/fail line per acceptance criterion."""

    def record(criterion, passed, detail):
        _REPORT.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
