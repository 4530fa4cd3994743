import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

FIXTURES = HERE / "fixtures"


@pytest.fixture
def lists_source() -> str:
    return (FIXTURES / "lists.m").read_text()


@pytest.fixture
def dispatch_source() -> str:
    return (FIXTURES / "dispatch.m").read_text()
