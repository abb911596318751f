import numpy as np
import pytest

from spatialsearch.graph import make_grid


@pytest.fixture(scope="session")
def cube64():
    return make_grid(3, 4)


@pytest.fixture(scope="session")
def cube512():
    return make_grid(3, 8)


def unit(n: int, *marked: int) -> np.ndarray:
    x = np.zeros(n, dtype=np.int8)
    for v in marked:
        x[v - 1] = 1
    return x
