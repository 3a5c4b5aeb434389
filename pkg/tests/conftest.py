import pathlib

import pytest

from jetvar import JetContext

PROBLEMS = pathlib.Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture
def ode_ctx():
    """One base variable, one field: the oscillator chart."""
    return JetContext.make("t", "y")


@pytest.fixture
def plane_ctx():
    """One base variable, two fields."""
    return JetContext.make("t", "q1 q2")


@pytest.fixture
def pde_ctx():
    """Two base variables, one field."""
    return JetContext.make("u v", "w")


@pytest.fixture
def metric_ctx():
    """Two fields with symbolic metric coefficient functions."""
    return JetContext.make(
        "t", "q1 q2",
        opaque={"g11": ["q1", "q2"], "g12": ["q1", "q2"], "g22": ["q1", "q2"]})


@pytest.fixture
def problems_dir():
    return PROBLEMS
