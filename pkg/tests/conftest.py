import numpy as np
import pytest

from nsdensity.basis import build_basis
from nsdensity.integrator import Model
from nsdensity.noise import CovarianceSpec, SubspaceF


@pytest.fixture(scope="session")
def basis1():
    return build_basis(1)


@pytest.fixture(scope="session")
def basis2():
    return build_basis(2)


@pytest.fixture(scope="session")
def model2(basis2):
    return Model(basis=basis2, cov=CovarianceSpec.from_basis(basis2), F=SubspaceF((0, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
