import numpy as np
import pytest

from heatlab.manifolds import (
    Circle,
    FlatTorus,
    Hyperbolic3,
    ProfileCurve,
    RevolutionSurface,
    Sphere2,
)

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def circle():
    return Circle(TWO_PI)


@pytest.fixture(scope="session")
def flat_torus():
    return FlatTorus((TWO_PI, TWO_PI))


@pytest.fixture(scope="session")
def sphere():
    return Sphere2(1.0)


@pytest.fixture(scope="session")
def h3():
    return Hyperbolic3()


@pytest.fixture(scope="session")
def rev_torus():
    return RevolutionSurface(ProfileCurve(torus=(2.0, 1.0), a=1.0))


@pytest.fixture(scope="session")
def rev_torus_model(rev_torus):
    # builds once per session; kernels.get_spectral_model caches by key so the
    # same model backs every evaluation in the suite
    from heatlab.kernels import get_spectral_model
    return get_spectral_model(rev_torus)
