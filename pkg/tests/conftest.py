import numpy as np
import pytest

import qgplab as q


@pytest.fixture(scope="session")
def neutron():
    """The neutron-scale rotating-field parameters (angular units)."""
    return q.RotatingFieldParams.from_frequencies(721e3, 7.21e3, 5.0)


@pytest.fixture(scope="session")
def neutron_model(neutron):
    return q.rotating_field(neutron)


@pytest.fixture(scope="session")
def unit_params():
    """Order-one parameters (eta, xi, K) = (1, 1, 1) for cheap exact checks."""
    return q.RotatingFieldParams(eta=1.0, xi=1.0, K=1.0)


@pytest.fixture(scope="session")
def wobble_params():
    """Sphere path theta = pi/4 + 0.1 sin t, phi = t with analytic derivatives."""
    return q.SphereFieldParams(
        B=1.3,
        theta_of_t=lambda t: 0.25 * np.pi + 0.1 * np.sin(t),
        phi_of_t=lambda t: np.asarray(t, dtype=np.float64),
        dtheta_of_t=lambda t: 0.1 * np.cos(t),
        dphi_of_t=lambda t: np.ones_like(np.asarray(t, dtype=np.float64)),
        d2theta_of_t=lambda t: -0.1 * np.sin(t),
        d2phi_of_t=lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
        char_time=2.0 * np.pi,
    )


@pytest.fixture(scope="session")
def static_three_level():
    h0 = np.diag([1.0, 2.0, 3.0]).astype(complex)
    return q.custom_model(3, lambda t: h0, name="static3")
