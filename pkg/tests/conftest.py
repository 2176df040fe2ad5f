import numpy as np
import pytest
from hypothesis import settings

from permshift.data import BinaryDataset, FeatureCatalog

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_dataset(X, y, names=None, tags=None) -> BinaryDataset:
    X = np.asarray(X, dtype=np.uint8)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"f{i}" for i in range(X.shape[1])]
    return BinaryDataset(FeatureCatalog(names), X, np.asarray(y, dtype=np.uint8), tags)


def random_dataset(rng: np.random.Generator, n: int, f: int, signal: int = 2) -> BinaryDataset:
    """Random bits whose label depends on the first ``signal`` columns plus noise."""
    X = (rng.random((n, f)) < 0.5).astype(np.uint8)
    score = X[:, :signal].sum(axis=1) + rng.random(n) * 1.5
    y = (score > np.median(score)).astype(np.uint8)
    if y.min() == y.max():
        y[0] ^= 1
    return make_dataset(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
