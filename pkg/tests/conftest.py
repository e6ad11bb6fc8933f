from __future__ import annotations

from pathlib import Path

import pytest

from igca import registry

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "igca" / "fixtures"


@pytest.fixture(scope="session")
def axy_path() -> Path:
    return FIXTURES / "axy.xml"


@pytest.fixture(scope="session")
def broker_path() -> Path:
    return FIXTURES / "broker.xml"


@pytest.fixture(scope="session")
def reference_path() -> Path:
    return FIXTURES / "axy_reference.json"


@pytest.fixture()
def axy_registry(axy_path) -> registry.RegistryFile:
    return registry.load(axy_path)
