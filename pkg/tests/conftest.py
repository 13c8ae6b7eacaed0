import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=100, deadline=None)
hypothesis.settings.load_profile("fast")

DATA_DIR = project_root / "data"


@pytest.fixture
def data_dir():
    return DATA_DIR


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs the full default verification suite")
