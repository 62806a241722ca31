import numpy as np
import pytest

from mpcone import fixtures


@pytest.fixture(scope="session")
def elliptope():
    return fixtures.elliptope()


@pytest.fixture(scope="session")
def single_sdp():
    return fixtures.single_param_sdp()


@pytest.fixture(scope="session")
def square_lp():
    return fixtures.square_lp()


def psi_closed_form(v):
    """Closed-form objective-parameter image on the elliptope's smooth part."""
    v1, v2 = float(v[0]), float(v[1])
    return np.array(
        [
            -v2 - v1 * np.sqrt((1 - v2**2) / (1 - v1**2)),
            -v1 - v2 * np.sqrt((1 - v1**2) / (1 - v2**2)),
        ]
    )


def phi_closed_form(u):
    """Closed-form rhs-parameter image on the elliptope's smooth part."""
    u1, u2 = float(u[0]), float(u[1])
    return np.array(
        [
            u2 / (2 * u1**2) - u2 / 2 - 1 / (2 * u2),
            -1 / (2 * u1) - u1 / 2 + u1 / (2 * u2**2),
        ]
    )


def region_of(u):
    """Which of the four linearity regions (by printed inequalities) u is in.

    Returns the constant image of that region, or None if u sits in the
    complement (the nonlinearity part).
    """
    u1, u2 = float(u[0]), float(u[1])
    if u1 < -1 and u2 < -1 and u1 + u2 + u1 * u2 >= 0:
        return (1.0, 1.0)
    if u1 > 1 and u2 > 1 and -u1 - u2 + u1 * u2 >= 0:
        return (-1.0, -1.0)
    if u1 < 1 and u2 > -1 and u2 >= u1 and u2 - u1 - u1 * u2 >= 0:
        return (1.0, -1.0)
    if u1 > -1 and u2 < 1 and u1 >= u2 and u1 - u2 - u1 * u2 >= 0:
        return (-1.0, 1.0)
    return None
