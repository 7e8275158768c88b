import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260418)


def random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (m + m.conj().T)


def random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, passed, detail, elapsed)."""

    def record(number, passed, detail, elapsed):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}  ({elapsed:.2f} s)"
        _CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
