import numpy as np
import pytest

from naifs import NaifsSchedule, Space, grid_points, make_map


@pytest.fixture(scope="session")
def circle():
    return Space("circle")


@pytest.fixture(scope="session")
def interval():
    return Space("interval")


@pytest.fixture(scope="session")
def torus2():
    return Space("torus", 2)


@pytest.fixture(scope="session")
def doubling(circle):
    return NaifsSchedule(circle, [[make_map(("circle_affine", {"k": 2}))]])


@pytest.fixture(scope="session")
def two_gen(circle):
    return NaifsSchedule(circle, [[make_map(("circle_affine", {"k": 2})),
                                  make_map(("circle_affine", {"k": 3}))]])


@pytest.fixture(scope="session")
def alternating(circle):
    return NaifsSchedule(circle, [[make_map(("circle_affine", {"k": 2}))],
                                  [make_map(("circle_affine", {"k": 3}))]],
                         tail=("block", 2))


@pytest.fixture(scope="session")
def identity_circle(circle):
    return NaifsSchedule(circle, [[make_map(("identity", {}))]])


@pytest.fixture(scope="session")
def halving(interval):
    return NaifsSchedule(interval, [[make_map(("interval_affine", {"a": 0.5, "b": 0.0}))]])


@pytest.fixture(scope="session")
def monotone_mixed(interval):
    return NaifsSchedule(interval, [[make_map(("power", {"p": 2.0})),
                                    make_map(("interval_affine", {"a": 1 / 1.3, "b": 0.3 / 1.3}))]])


@pytest.fixture(scope="session")
def fine_circle_grid(circle):
    return grid_points(circle, 2**-12)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
