import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from clifford_structures import build_generators, heisenberg  # noqa: E402


@pytest.fixture
def heis():
    return heisenberg()


@pytest.fixture
def quaternionic():
    """H(4,3): three anticommuting complex structures on R^4"""
    return build_generators(4, 3)


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    monkeypatch.delenv('HGAP_THREADS', raising=False)
    monkeypatch.delenv('HGAP_REGISTRY', raising=False)
