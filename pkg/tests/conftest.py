import numpy as np
import pytest

from landensemble.io import ClassLegend, SampleSet

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_class_samples():
    r = np.random.default_rng(7)
    x = np.vstack([r.normal(0, 1, (50, 3)), r.normal(3, 1, (50, 3))])
    y = np.r_[np.zeros(50, int), np.ones(50, int)]
    return SampleSet(x, y), ClassLegend(("a", "b"))


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one (criterion, passed, detail) line per acceptance check."""

    def record(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}  {detail}")
