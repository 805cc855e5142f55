import numpy as np
import pytest

from gcomprobust import TrialDataset

FIXTURE_ARM = np.array([1] * 6 + [2] * 6)
FIXTURE_X = np.array([-1.2, -0.5, 0.3, 0.8, 1.5, 2.1, -1.8, -0.7, 0.0, 0.6, 1.1, 1.9])
FIXTURE_Y = np.array([0, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1], dtype=float)


@pytest.fixture
def fixture_data():
    """Published 12-subject, two-arm, one-covariate dataset."""
    return TrialDataset(FIXTURE_ARM, FIXTURE_Y, FIXTURE_X[:, None], [0.5, 0.5])


def random_dataset(rng, n=None, k=None, p=None, pi=None):
    """Well-posed random trial: logistic outcomes, every arm with both outcomes."""
    while True:
        k_ = k or int(rng.integers(2, 5))
        n_ = n or int(rng.integers(30, 300))
        p_ = int(rng.integers(0, 4)) if p is None else p
        pi_ = np.full(k_, 1.0 / k_) if pi is None else np.asarray(pi)
        arm = rng.choice(k_, size=n_, p=pi_) + 1
        x = rng.normal(size=(n_, p_)) * rng.uniform(0.5, 3, size=p_)
        eta = rng.normal(scale=1.0, size=k_)[arm - 1] + x @ rng.normal(scale=0.7, size=p_)
        y = (rng.random(n_) < 1 / (1 + np.exp(-eta))).astype(float)
        ok = all(
            np.sum(arm == t) >= 3 and 0 < y[arm == t].sum() < np.sum(arm == t)
            for t in range(1, k_ + 1)
        )
        if ok:
            return TrialDataset(arm, y, x, pi_, k_)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


_acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
