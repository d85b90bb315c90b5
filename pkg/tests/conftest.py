import numpy as np
import pytest

from iso4d import topology
from iso4d.field import CellPattern


@pytest.fixture(scope="session")
def table():
    return topology.standard_table()


@pytest.fixture(scope="session")
def geom():
    return topology.standard_geometry()


def make_pattern(bits, values=None, ghost_bits=0):
    if values is None:
        values = np.zeros(16)
    return CellPattern(int(bits), np.asarray(values, dtype=np.float64), ghost_bits)


def bits_of(*sites):
    out = 0
    for s in sites:
        out |= 1 << s
    return out
