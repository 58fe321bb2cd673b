import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dualrate_ncs.controller import DualRateGains
from dualrate_ncs.plant import ContinuousPlant, TimingConfig

_CRITERIA: list[str] = []


@pytest.fixture
def robot():
    """Integrator-lag robot axis 6.3 / (s (s + 17.7)) with its actuator limits."""
    return ContinuousPlant.from_gain_pole(6.3, 17.7, sat_limit=1.0, dead_zone=0.06)


@pytest.fixture
def robot_pv():
    """Same axis in position/velocity coordinates."""
    return ContinuousPlant([[0.0, 1.0], [0.0, -17.7]], [[0.0], [6.3]], [[1.0, 0.0]])


@pytest.fixture
def timing():
    return TimingConfig(big_t=0.1, multiplicity=2, base_divisor=10)


@pytest.fixture
def gains():
    return DualRateGains(kp=12.0, td=0.01, ti=3.5)


@pytest.fixture
def criterion():
    """Record a one-line verdict for the acceptance summary."""
    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
