"""Session-scoped scenario cache: building a scenario validates the whole
connection and split, which is worth doing once per test session."""

from __future__ import annotations

import pytest

from ehresmann.geometry import DEFAULT_CHECK
from ehresmann import scenarios as sc


@pytest.fixture(scope="session")
def built():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = sc.build_scenario(name, DEFAULT_CHECK)
        return cache[name]

    return get
