import numpy as np
import pytest

from annealbench.instance_gen import GeneratorConfig, generate_usa_instance


@pytest.fixture(scope="session")
def small_instances():
    """A handful of N=5 USA instances."""
    return [generate_usa_instance(GeneratorConfig(5, seed=s)) for s in range(6)]


@pytest.fixture(scope="session")
def inst5(small_instances):
    return small_instances[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion, then assert it."""

    def record(number, ok, detail):
        _CRITERIA[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        assert ok, _CRITERIA[number]

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
