import numpy as np
import pytest

from oblivious_ellipsoid import BoxSystem, CertifiedBounds, Instance, from_box, normalize_columns


def square_instance() -> Instance:
    box = BoxSystem(np.zeros((2, 0)), np.zeros(0), -np.ones(2), np.ones(2))
    p, b = from_box(box)
    return Instance(p, b, box=box)


def diagonal_instance() -> Instance:
    a = np.array([[1.0], [1.0]]) / np.sqrt(2.0)
    box = BoxSystem(a, np.array([-1.2]), -np.ones(2), np.ones(2))
    p, b = from_box(box)
    return Instance(p, b, box=box)


def pair_instance(l=(-1.0, -1.0)) -> Instance:
    """``x <= -0.5`` and ``-x <= -0.5``: infeasible in one dimension."""
    p = normalize_columns(np.array([[1.0, -1.0]]), np.array([-0.5, -0.5]))
    lam = np.array([[0.0, 1.0], [1.0, 0.0]])
    return Instance(p, CertifiedBounds(np.array(l, dtype=float), lam))


@pytest.fixture
def square():
    return square_instance()


@pytest.fixture
def diagonal():
    return diagonal_instance()


@pytest.fixture
def pair():
    return pair_instance()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
