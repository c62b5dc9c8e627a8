import numpy as np
import pytest

from tabaug.dataset import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_linear():
    """y = 2x on 200 evenly spaced points, no noise."""
    x = np.linspace(-1.0, 1.0, 200).reshape(-1, 1)
    return Dataset(x, 2.0 * x[:, 0], ("x",), "y")


def random_dataset(rng, n=60, d=3):
    X = rng.normal(size=(n, d)) * rng.uniform(0.5, 5.0, size=d) + rng.normal(size=d)
    y = X @ rng.normal(size=d) + rng.normal(size=n)
    return Dataset(X, y)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number} {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
