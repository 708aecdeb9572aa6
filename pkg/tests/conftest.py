import numpy as np
import pytest

from hardykit import coverings, kernels
from hardykit.verifier import VerifierSettings

# settings used by most campaign tests: fast but honest
FAST = VerifierSettings(tgrid_ppd=12, qmc_y=4)


@pytest.fixture(scope="session")
def qb_small():
    return coverings.covering_bessel((-1, 1))


@pytest.fixture(scope="session")
def qb_wide():
    return coverings.covering_bessel((-3, 3))


@pytest.fixture(scope="session")
def ql_small():
    return coverings.covering_laguerre((-2, 1))


@pytest.fixture(scope="session")
def bessel1():
    return kernels.BesselKernel(1.0)


@pytest.fixture(scope="session")
def heat1():
    return kernels.EuclideanHeat(1)


@pytest.fixture(scope="session")
def laguerre_half():
    return kernels.LaguerreKernel(0.5)


@pytest.fixture(scope="session")
def schrodinger_v1():
    return kernels.schrodinger_build(lambda x: np.ones_like(x), 20.0, 1200)


@pytest.fixture(scope="session")
def schrodinger_v0():
    return kernels.schrodinger_build(lambda x: np.zeros_like(x), 20.0, 1200)


@pytest.fixture(scope="session")
def schrodinger_x2():
    return kernels.schrodinger_build(lambda x: x * x, 20.0, 2000)
