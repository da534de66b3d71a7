import numpy as np
import pytest

from catsim.hilbert import CavityBasis, cat_state


@pytest.fixture(scope="session")
def basis20():
    return CavityBasis(dim=20)


@pytest.fixture(scope="session")
def even_cat(basis20):
    return cat_state(np.sqrt(2.0), basis20, parity="even")


@pytest.fixture(scope="session")
def odd_cat(basis20):
    return cat_state(np.sqrt(2.0), basis20, parity="odd")
