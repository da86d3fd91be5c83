import numpy as np
import pytest

from dtdq_aoi import S1, SystemConfig, dph_geometric, dph_uniform

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def geo_config():
    return SystemConfig(dph_geometric(0.3), dph_geometric(0.2), 2, S1)


@pytest.fixture
def mixed_config():
    return SystemConfig(dph_uniform(1, 3), dph_geometric(0.4), 3, S1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
