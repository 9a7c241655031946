"""Shared fixtures: the three standard test objects, built once per session."""

import pytest

from wrapgrasp.curves import (build_circle, build_deformed_circle,
                              build_ellipse)


@pytest.fixture(scope="session")
def circle5():
    return build_circle(5.0)


@pytest.fixture(scope="session")
def ellipse84():
    return build_ellipse(8.0, 4.0)


@pytest.fixture(scope="session")
def deformed53():
    return build_deformed_circle(5.0, 0.15, 3)


@pytest.fixture(scope="session")
def all_objects(circle5, ellipse84, deformed53):
    return {"circle": circle5, "ellipse": ellipse84, "deformed": deformed53}
