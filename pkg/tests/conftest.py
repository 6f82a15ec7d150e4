import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from execgate.se3 import Pose, exp_rotation

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def rotvecs(draw, max_angle=np.pi - 1e-3):
    axis = np.array(draw(st.lists(st.floats(-1, 1, **finite), min_size=3, max_size=3)))
    if np.linalg.norm(axis) < 1e-3:
        axis = np.array([0.0, 0.0, 1.0])
    angle = draw(st.floats(0.0, max_angle, **finite))
    return axis / np.linalg.norm(axis) * angle


@st.composite
def poses(draw, max_angle=np.pi - 1e-3, max_t=1000.0):
    v = draw(rotvecs(max_angle))
    t = draw(st.lists(st.floats(-max_t, max_t, **finite), min_size=3, max_size=3))
    return Pose(exp_rotation(v), t)


def random_pose(rng, max_angle=np.pi - 1e-3, max_t=1000.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return Pose(exp_rotation(axis * rng.uniform(0, max_angle)), rng.uniform(-max_t, max_t, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
