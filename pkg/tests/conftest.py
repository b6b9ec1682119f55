import math

import pytest

from ewmirror.constants import RB87_D2
from ewmirror.ew_optics import EwGeometry, angle_from_decay_length, detuning_from_gamma, make_field

N_GLASS = 1.51
WAIST = 335e-6
POWER = 19e-3
HEIGHT = 6.6e-3


def geometry(xi_um=0.67, power=POWER, n=N_GLASS):
    theta = angle_from_decay_length(xi_um * 1e-6, n, RB87_D2)
    return EwGeometry(n, theta, WAIST, power)


def field(xi_um=0.67, delta_gamma=44.0, power=POWER):
    return make_field(geometry(xi_um, power), RB87_D2, detuning_from_gamma(delta_gamma, RB87_D2))


def p_incident(height=HEIGHT):
    return RB87_D2.mass * math.sqrt(2 * 9.81 * height)


@pytest.fixture
def rb():
    return RB87_D2
