import pytest

from mdl.realnum import RealParam


@pytest.fixture(scope="session")
def sqrt2():
    return RealParam.sqrt(2)


@pytest.fixture(scope="session")
def sqrt3():
    return RealParam.sqrt(3)


@pytest.fixture(scope="session")
def golden():
    return RealParam.const("golden")
