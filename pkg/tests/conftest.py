import numpy as np
import pytest

from sigfuse import build_strategy_matrix, generate_synthetic, indicator_frame


@pytest.fixture(scope="session")
def long_series():
    return generate_synthetic(seed=1, n_days=2500, start_price=30000.0, drift=0.0003, vol=0.01)


@pytest.fixture(scope="session")
def long_frame(long_series):
    return indicator_frame(long_series)


@pytest.fixture(scope="session")
def long_matrix(long_frame, long_series):
    return build_strategy_matrix(long_frame, long_series.closes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_csv(rows, header="date,open,high,low,close,volume"):
    return header + "\n" + "\n".join(rows) + "\n"
