import os
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "data" / "fixtures"


@pytest.fixture
def fixture_dir():
    return FIXTURES


def dataset_dir():
    """Directory with the public ETH/UCY recordings, if the user provides one."""
    path = os.environ.get("GOALFORCE_DATASET_DIR")
    return Path(path) if path and Path(path).is_dir() else None
