import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def default_channels():
    from spikeapprox import simgen
    return simgen.build_default_channels(1)


@pytest.fixture(scope="session")
def templates(default_channels):
    from spikeapprox import simgen
    return [w for _, _, w in simgen.iter_templates(default_channels)]


@pytest.fixture(scope="session")
def reference_template(default_channels):
    from spikeapprox import simgen
    return simgen.render_template(default_channels[0].templates[0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
