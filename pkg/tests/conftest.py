import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_dataset():
    """The 500 s record at Hs=0.18 m, Tp=2 s with every default (a few seconds)."""
    from wavecast.sim import WaveCondition, generate_dataset

    return generate_dataset(WaveCondition())


_VERDICTS: list[str] = []


@pytest.fixture(scope="session")
def verdicts():
    """Acceptance tests append one PASS/FAIL line here; all are echoed at the end of the run."""
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[0].strip("[]#"))):
            terminalreporter.write_line(line)
