import numpy as np
import pytest

from camplace import generate_synthetic_scene


@pytest.fixture(scope="session")
def box_room():
    return generate_synthetic_scene("box_room", (4, 4, 3), 0.15)


@pytest.fixture(scope="session")
def small_room():
    return generate_synthetic_scene("box_room", (3, 3, 2.5), 0.2)


@pytest.fixture(scope="session")
def two_room():
    return generate_synthetic_scene("two_room_doorway", (6, 4, 2.8), 0.2)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
