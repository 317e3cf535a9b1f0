import sys
from pathlib import Path

import pytest

from blocknas.space import template_default

STUB = [sys.executable, str(Path(__file__).parent / "stubs" / "stub_evaluator.py")]


@pytest.fixture(scope="session")
def v1_template():
    return template_default("v1")


@pytest.fixture(scope="session")
def v2_template():
    return template_default("v2")
