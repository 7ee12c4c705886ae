import math

import numpy as np
import pytest

from contactkam.grids import GridField, PeriodicGrid
from contactkam.models import make_model

TWO_PI = 2.0 * math.pi


@pytest.fixture
def grid1d():
    return PeriodicGrid((128,), (1.0,))


@pytest.fixture
def grid2d():
    return PeriodicGrid((16, 16), (1.0, 1.0))


@pytest.fixture
def quad_model():
    return make_model("quadratic_contact", circle_lengths=(1.0,), v_max=4.0)


@pytest.fixture
def pendulum_model():
    return make_model("pendulum_dissipative", circle_lengths=(TWO_PI,), v_max=8.0, p0=2.0)


@pytest.fixture
def manufactured_model():
    return make_model("manufactured", circle_lengths=(1.0,), v_max=3.0, amplitude=0.3)


def u1_field(n: int) -> GridField:
    """Even 1-periodic extension of -x^2/2 on [0, 1/2], sampled on n nodes.

    A non-maximal forward solution of u + |Du|^2/2 = 0 with a kink at x = 1/2.
    """
    g = PeriodicGrid((n,), (1.0,))
    x = g.axis(0)
    d = np.minimum(x, 1.0 - x)
    return GridField(g, -0.5 * d * d)
