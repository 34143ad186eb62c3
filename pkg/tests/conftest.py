import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).parent / "data"
DESIGN_FILE = DATA / "sym045_1038.csv"


def random_sphere(n, seed=0, d=2):
    x = np.random.default_rng(seed).normal(size=(n, d + 1))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.fixture(scope="session")
def sobolev2():
    from dwrls.kernels import make_sobolev

    return make_sobolev(2, 2.0)


@pytest.fixture(scope="session")
def design_points():
    from dwrls.geometry import load_points

    return load_points(DESIGN_FILE)


_DESIGN_CACHE = {}


def design_coords():
    """Nodes of the stored equal-weight design (exact to degree 45)."""
    if "x" not in _DESIGN_CACHE:
        from dwrls.geometry import load_points

        _DESIGN_CACHE["x"] = load_points(DESIGN_FILE).coords
    return _DESIGN_CACHE["x"]


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
