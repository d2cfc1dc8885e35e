import numpy as np
import pytest

from sparse_sched.lds_model import LinearSystem


def random_system(seed: int, n: int, m: int, scale: float = 1.0) -> LinearSystem:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) * scale / np.sqrt(n)
    B = rng.standard_normal((n, m))
    return LinearSystem(A, B)


@pytest.fixture
def diag21():
    return LinearSystem(np.diag([2.0, 1.0]), np.eye(2))


@pytest.fixture
def zero2():
    return LinearSystem(np.zeros((2, 2)), np.eye(2))


@pytest.fixture
def ident2():
    return LinearSystem(np.eye(2), np.eye(2))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
