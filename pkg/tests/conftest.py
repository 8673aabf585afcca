import os

import pytest

from warplab.immersion import builtin_example, mesh

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "warplab", "scenarios")


@pytest.fixture(scope="session")
def plane_mesh():
    return mesh(builtin_example("euclidean_plane"), (101, 101))


@pytest.fixture(scope="session")
def catenoid_mesh():
    return mesh(builtin_example("catenoid"), (200, 100))


@pytest.fixture(scope="session")
def sphere_mesh():
    return mesh(builtin_example("round_sphere"), (31, 40))


@pytest.fixture(scope="session")
def scenario_dir():
    return os.path.abspath(SCENARIO_DIR)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    return pytestconfig.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
