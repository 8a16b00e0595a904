import numpy as np
import pytest

from ehswitch.energy_model import HarvestTrace, TransmitterConfig

DEFAULT_TX = [
    TransmitterConfig(1, 1.0, 1.0, 5.0, -100.0),
    TransmitterConfig(2, 1 / 10, 20.0, 24.0, -101.0),
    TransmitterConfig(3, 1 / 20, 100.0, 104.0, -102.0),
    TransmitterConfig(4, 1 / 30, 4.0, 44.0, -103.0),
]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def trace(tx_id, times=(), amounts=(), initial=0.0, horizon=np.inf):
    return HarvestTrace(tx_id, np.array(times, float), np.array(amounts, float), initial, horizon)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
