import math

import numpy as np
import pytest

from trefcap.geometry import build_closed_curve_mesh, build_rect_mesh


def blob_curve(t):
    """Asymmetric smooth closed curve; no discrete symmetry, so no weighting
    family degenerates on it."""
    phi = 2 * math.pi * t
    r = 1.0 + 0.25 * math.cos(2 * phi) + 0.15 * math.sin(3 * phi)
    return (0.3 + r * math.cos(phi), -0.2 + r * math.sin(phi))


@pytest.fixture
def unit_square():
    return build_rect_mesh(0.0, 0.0, 1.0, 1.0)


@pytest.fixture
def blob_mesh():
    return build_closed_curve_mesh(blob_curve, 13, geometry_degree=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
