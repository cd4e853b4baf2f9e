"""Common fixtures for use across the test package"""
import os
import subprocess
import sys
from pathlib import Path

import pytest

from cclab import fowler
from cclab.fixtures import fowler_fixture

PACKAGE_ROOT = Path(__file__).parents[2]


@pytest.fixture(scope="session")
def v0_4() -> float:
    return fowler.equilibrium_v0(4)


@pytest.fixture(scope="session")
def half_orbit_4(v0_4) -> fowler.FowlerTrajectory:
    """Ten periods of the n=4 Fowler solution with epsilon = v0 / 2"""
    epsilon = 0.5 * v0_4
    span = 10 * fowler.period(epsilon, 4)
    return fowler.integrate(fowler.FowlerParams(4, epsilon), 0.0, span)


@pytest.fixture(scope="session")
def fowler_instance_3():
    """The default Fowler instance: n=3, epsilon = v0 / 2, cut mid-descent"""
    return fowler_fixture(3, 0.5)


@pytest.fixture(scope="session")
def cylinder_instance_3():
    """The n=3 Fowler instance at the equilibrium (the round cylinder)"""
    return fowler_fixture(3, 1.0, t0=0.0)


@pytest.fixture(scope="session")
def cli_env() -> dict[str, str]:
    """Environment for running the CLI in a subprocess against this checkout"""
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(
        filter(None, (str(PACKAGE_ROOT), env.get("PYTHONPATH")))
    )
    env["CCLAB_THREADS"] = "1"
    env["NO_COLOR"] = "1"
    return env


@pytest.fixture
def run_cli(cli_env, tmp_path):
    """Call the command-line interface from inside a scratch folder"""
    def run(*args: str, **kwargs):
        return subprocess.run(
            [sys.executable, "-m", "cclab", *args],
            cwd=tmp_path,
            env=cli_env,
            capture_output=True,
            text=True,
            **kwargs,
        )

    return run

