import numpy as np
import pytest

from aco_alloc.channel import ChannelState, reference_channel
from aco_alloc.params import SystemParams


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def table_params():
    return SystemParams()


@pytest.fixture(scope="session")
def table_channel(table_params):
    return reference_channel(table_params)


@pytest.fixture
def small_params():
    # four data subcarriers
    return SystemParams(n=8)


def random_instances(count=10, seed=2024):
    """Four-subcarrier channels with |H| log-uniform in [1e-7, 4e-6] and a budget in {0.25, 1, 4} W."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        mags = np.exp(rng.uniform(np.log(1e-7), np.log(4e-6), 4))
        phases = rng.uniform(0, 2 * np.pi, 4)
        budget = (0.25, 1.0, 4.0)[k % 3]
        out.append((ChannelState(mags * np.exp(1j * phases)), budget))
    return out
