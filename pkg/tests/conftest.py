import pytest

from workpulse.prompts import load_catalog


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()
