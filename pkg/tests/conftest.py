import numpy as np
import pytest

from agavescan.geo import BitMask, GeoTransform, Polygon


@pytest.fixture
def tf():
    # binary-fraction pixel size keeps map<->pixel conversions exact
    return GeoTransform(500000.0, 2300000.0, 0.5, -0.5, "EPSG:32613")


def rect_polygon(tf, c0, r0, c1, r1):
    """Axis-aligned rectangle in map coords from pixel-lattice corners."""
    corners = [(c0, r0), (c1, r0), (c1, r1), (c0, r1), (c0, r0)]
    return Polygon(tuple(tf.pixel_to_map(c, r) for c, r in corners))


def random_mask(rng, width, height, p=0.5):
    return BitMask(rng.random((height, width)) < p)


def strip_mask(width, height, col0, col1, row0=0, row1=1):
    """Mask with a filled [row0,row1) x [col0,col1) block."""
    m = np.zeros((height, width), dtype=bool)
    m[row0:row1, col0:col1] = True
    return BitMask(m)
