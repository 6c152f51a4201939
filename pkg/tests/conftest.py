import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def random_disk_points(rng, n, r_max=0.9):
    """Uniform-in-angle points with radius drawn in [0.05, r_max]."""
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = rng.uniform(0.05, r_max, n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def random_graph_weights(rng, n):
    w = np.triu(rng.uniform(0, 1, (n, n)), 1)
    return w + w.T


def non_degenerate_pair(rng, min_cross=0.05):
    # keep clear of the geodesic-through-origin kink
    while True:
        x, y = random_disk_points(rng, 2)
        if abs(x[0] * y[1] - x[1] * y[0]) > min_cross:
            return x, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report_criterion(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
