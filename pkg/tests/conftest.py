import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from noisyhopf.expansion import expand  # noqa: E402
from noisyhopf.spectrum import solve_hopf  # noqa: E402


@pytest.fixture(scope="session")
def hopf12():
    return solve_hopf(12.0)


@pytest.fixture(scope="session")
def point():
    return expand(-0.05, 60.0)
