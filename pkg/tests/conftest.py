import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from massmed.mediation import Dataset

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_dataset(n, d=2, q=1, kind="continuous", seed=0, alpha=0.3, beta=0.4):
    """Small synthetic mediation dataset with nonzero paths."""
    gen = np.random.default_rng(seed)
    x = gen.standard_normal(n)
    z = gen.standard_normal((n, q))
    m = 0.2 + alpha * x[:, None] + 0.5 * z.sum(axis=1, keepdims=True) + gen.standard_normal((n, d))
    lin = 0.1 + 0.5 * x + m @ np.full(d, beta) + z.sum(axis=1) * 0.3
    if kind == "continuous":
        y = lin + gen.standard_normal(n)
    else:
        y = (gen.random(n) < 1 / (1 + np.exp(-lin))).astype(float)
    return Dataset(x=x, m=m, y=y, z=z, kind=kind)


@pytest.fixture
def linear_data():
    return make_dataset(400, d=3, q=2, seed=11)


@pytest.fixture
def logistic_data():
    return make_dataset(600, d=3, q=2, kind="binary", seed=12)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
