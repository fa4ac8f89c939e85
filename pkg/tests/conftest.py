import numpy as np
import pytest

from shapley_curves import Dataset, make_dgp, sample


@pytest.fixture(scope="session")
def dgp1_small():
    return sample(make_dgp("dgp1_additive"), 200, 2024)


@pytest.fixture(scope="session")
def dgp3_small():
    return sample(make_dgp("dgp3_bivariate"), 250, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(n, d, seed=0, fn=None, noise=0.3):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 1.5, (n, d))
    f = fn or (lambda x: np.sin(x[:, 0]) + 0.5 * x[:, -1] ** 2)
    return Dataset(x, f(x) + noise * rng.standard_normal(n))


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary, then assert."""

    def record(name, ok, detail):
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance summary")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
