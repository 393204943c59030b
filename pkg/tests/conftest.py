import pytest

from ehr_abms import pairing
from ehr_abms.util import seeded_entropy


@pytest.fixture(scope="session")
def params():
    return pairing.setup(128)


@pytest.fixture
def entropy():
    return seeded_entropy(1234)
