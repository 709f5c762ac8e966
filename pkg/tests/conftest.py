import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from emg_reservoir.dataio import synth_trials

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def synth_set():
    return synth_trials(3, 3, 5, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
