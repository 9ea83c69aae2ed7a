import math

import numpy as np
import pytest

# DH rows (a, alpha, d, theta_offset) for the two bundled arms; these mirror
# the shipped config files and are kept literal here so kinematics tests do
# not depend on the config loader.
DESK6_DH = [
    (0.0, math.pi / 2, 0.30, 0.0),
    (0.25, 0.0, 0.0, 0.0),
    (0.20, 0.0, 0.0, 0.0),
    (0.0, math.pi / 2, 0.0, 0.0),
    (0.0, -math.pi / 2, 0.15, 0.0),
    (0.0, 0.0, 0.08, 0.0),
]

DESK7_DH = [
    (0.0, math.pi / 2, 0.30, 0.0),
    (0.25, 0.0, 0.0, 0.0),
    (0.0, math.pi / 2, 0.0, 0.0),
    (0.0, -math.pi / 2, 0.22, 0.0),
    (0.0, math.pi / 2, 0.0, 0.0),
    (0.0, -math.pi / 2, 0.15, 0.0),
    (0.0, 0.0, 0.08, 0.0),
]


@pytest.fixture(params=["desk6", "desk7"])
def arm_dh(request):
    return np.array(DESK6_DH if request.param == "desk6" else DESK7_DH)


def random_quat(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return tuple(q)


def random_pose(rng):
    from reconcell.model import Pose

    return Pose(tuple(rng.uniform(-2, 2, 3)), random_quat(rng))
