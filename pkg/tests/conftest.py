import numpy as np
import pytest

from twostage_deming import Dataset

ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{number}] {title}: {detail}")


@pytest.fixture
def three_points():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([0.0, 2.0, 3.0])
    return Dataset(x, y, np.ones(3), np.ones(3))


@pytest.fixture
def hetero4():
    return Dataset(
        [0.0, 1.0, 2.0, 3.0],
        [0.1, 1.9, 4.2, 5.8],
        [0.5, 0.1, 0.3, 0.2],
        [0.2, 0.4, 0.1, 0.3],
    )


def random_dataset(rng, n, *, hetero=True, slope=1.5, extra=0.0):
    X = np.sort(rng.uniform(0.0, 4.0, n))
    if hetero:
        vx = rng.uniform(0.02, 0.3, n)
        vy = rng.uniform(0.02, 0.3, n)
    else:
        vx = np.full(n, 0.1)
        vy = np.full(n, 0.1)
    x = X + rng.normal(0, np.sqrt(vx + extra))
    y = 0.5 + slope * X + rng.normal(0, np.sqrt(vy + extra))
    return Dataset(x, y, vx, vy)
