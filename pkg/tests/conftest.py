import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile(
    "default", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def small_matrices(max_rows=5, max_cols=5, min_value=-3.0, max_value=3.0):
    shapes = st.tuples(st.integers(1, max_rows), st.integers(1, max_cols))
    # one-decimal grid keeps hypothesis away from subnormal entries and huge pinvs
    elems = st.integers(int(min_value * 10), int(max_value * 10)).map(lambda v: v / 10.0)
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=elems))


seeds = st.integers(0, 2**31 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
