import math

import numpy as np
import pytest

from afv.geometry import ArrayGeometry, CameraModel, build_grid, load_default_geometry


@pytest.fixture(scope="session")
def geom() -> ArrayGeometry:
    return load_default_geometry()


@pytest.fixture(scope="session")
def cam() -> CameraModel:
    return CameraModel(width=640, height=360, diagonal_fov_deg=72.0)


@pytest.fixture(scope="session")
def grid(cam):
    return build_grid(cam, cols=64, rows=36, distance_m=1.5)


@pytest.fixture
def two_mic_geom() -> ArrayGeometry:
    return ArrayGeometry(mics=np.array([[-0.063, 0.0, 0.0], [0.063, 0.0, 0.0]]))


def direction_to_point(az_deg: float, el_deg: float, distance: float) -> tuple:
    """Camera-frame point for a horizontal/vertical angle pair (+y down)."""
    x = distance * math.tan(math.radians(az_deg))
    y = distance * math.tan(math.radians(el_deg))
    return (x, y, distance)
