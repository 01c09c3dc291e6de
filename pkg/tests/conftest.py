import pytest

from intermap.mapcore import preset


@pytest.fixture(scope="session")
def decay():
    return preset("decay")


@pytest.fixture(scope="session")
def decay_perturbed():
    return preset("decay", pert_amp=0.05)


@pytest.fixture(scope="session")
def stable():
    return preset("stable")


@pytest.fixture(scope="session")
def clt():
    return preset("clt")


@pytest.fixture(scope="session")
def infinite():
    return preset("infinite")
