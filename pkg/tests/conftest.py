import numpy as np
import pytest

from landaulab.collision import assemble_collision
from landaulab.grid import GridSpec, build_grid


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="also run the fine-grid and regime-sweep checks",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def grid9():
    return build_grid(GridSpec(n_per_axis=9))


@pytest.fixture(scope="session")
def ops9(grid9):
    """Production-size operator family, gamma = 0."""
    return assemble_collision(grid9)


@pytest.fixture(scope="session")
def ops9_gm1():
    return assemble_collision(build_grid(GridSpec(n_per_axis=9, gamma=-1.0)))


@pytest.fixture(scope="session")
def ops5():
    """Small family for anything needing dense exponentials of block systems."""
    return assemble_collision(build_grid(GridSpec(n_per_axis=5)))


@pytest.fixture(scope="session")
def smooth5(ops5):
    """A smooth scaled-sample state that keeps the stiff tail directions quiet."""
    g = ops5.grid
    pts = g.points
    return (
        g.sqrt_maxwellian
        * g.sqrt_weights
        * (1.0 + 0.2 * pts[:, 0] + 0.1 * pts[:, 1] * pts[:, 2])
    ).astype(complex)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
