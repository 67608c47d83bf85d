import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def defaults():
    return str(ROOT / "configs" / "paper_defaults.cfg")


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("SFIM_CLI")
    if not path:
        pytest.skip("SFIM_CLI is not set")
    return path


SMALL = {"layers": 2, "elements_x": 3, "elements_z": 3, "num_users": 2, "num_antennas": 2, "max_iters": 30}


@pytest.fixture
def small_overrides():
    return dict(SMALL)


@pytest.fixture
def small(defaults):
    import sfim

    return sfim.Problem(defaults, SMALL)
