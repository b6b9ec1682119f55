import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import hbar

from conftest import N_GLASS, WAIST, field
from ewmirror.constants import RB87_D2
from ewmirror.errors import (
    ConfigError,
    InvalidMediumError,
    ResonantDetuningError,
    SupercriticalAngleError,
)
from ewmirror.ew_optics import (
    EwGeometry,
    Polarization,
    angle_from_decay_constant,
    critical_angle,
    decay_profile,
    detuning_from_gamma,
    detuning_from_mhz,
    detuning_to_gamma,
    dipole_potential,
    enhancement,
    enhancement_te,
    enhancement_tm,
    make_field,
    parse_detuning,
    saturation_parameter,
    scattering_rate,
    telescope_angle,
)

TC = math.asin(1 / N_GLASS)


def fresnel_oracle(n, theta):
    """Surface intensity ratio from the Fresnel amplitudes written with
    complex arithmetic (independent of the closed form in the package)."""
    cos_t = math.cos(theta)
    cos_v = -1j * cmath.sqrt((n * math.sin(theta)) ** 2 - 1)  # evanescent: cos = i q
    tp = 2 * n * cos_t / (cos_t + n * cos_v)
    # both TM field components at the surface (in units of the glass field)
    ex = abs(tp * cos_v) ** 2
    ez = abs(tp * n * math.sin(theta)) ** 2
    return (ex + ez) / n


# -- oracles


def test_enhancement_matches_complex_fresnel_oracle():
    for off in (1e-4, 0.9e-3, 5e-3, 15.2e-3, 24e-3, 0.3, 0.7):
        theta = TC + off
        assert enhancement_tm(N_GLASS, theta) == pytest.approx(fresnel_oracle(N_GLASS, theta), rel=1e-12)


def test_saturation_parameter_recomputed_by_hand():
    f = field(0.67, 44)
    t = f.enhancement
    intensity = 2 * 19e-3 / (math.pi * WAIST**2)
    s0 = (1 / 88) ** 2 * t * intensity / 16.5
    assert f.s0 == pytest.approx(s0, rel=1e-12)
    assert f.u0 == pytest.approx(hbar * detuning_from_gamma(44, RB87_D2) * s0 / 2, rel=1e-12)


# -- critical angle and geometry


@pytest.mark.parametrize("n, deg", [(1.51, 41.4), (math.sqrt(2), 45.0), (2.0, 30.0)])
def test_critical_angle(n, deg):
    assert math.degrees(critical_angle(n)) == pytest.approx(deg, abs=0.1)


def test_critical_angle_rejects_non_dense_medium():
    with pytest.raises(InvalidMediumError):
        critical_angle(1.0)


@pytest.mark.parametrize("off, xi_um", [(0.9e-3, 2.8), (15.2e-3, 0.67), (24.0e-3, 0.53)])
def test_decay_length_at_published_angles(off, xi_um):
    g = EwGeometry.above_critical(N_GLASS, off, WAIST, 19e-3)
    kappa, xi, kx = decay_profile(g, RB87_D2)
    assert xi * 1e6 == pytest.approx(xi_um, abs=0.05)
    assert xi * kappa == pytest.approx(1.0, rel=1e-15)
    assert kx > RB87_D2.k0


def test_subcritical_angle_rejected():
    with pytest.raises(SupercriticalAngleError):
        EwGeometry(N_GLASS, TC - 1e-3, WAIST, 0.019)


@pytest.mark.parametrize("da, expected", [(0.0, 0.0), (0.102e-3, 0.9e-3), (2.72e-3, 24.0e-3)])
def test_telescope_angle(da, expected):
    assert telescope_angle(da, 75e-3, 1.51) == pytest.approx(expected, abs=0.05e-3)


def test_telescope_sign_follows_displacement():
    assert telescope_angle(-1e-3, 75e-3, 1.51) < 0


def test_decay_constant_increasing_and_vanishing_at_critical():
    offs = np.geomspace(1e-7, 0.8, 60)
    kappas = [decay_profile(EwGeometry.above_critical(N_GLASS, o, WAIST, 0.01), RB87_D2)[0]
              for o in offs]
    assert np.all(np.diff(kappas) > 0)
    assert kappas[0] < 1e-2 * RB87_D2.k0


@given(st.floats(1e-6, math.pi / 2 - TC - 1e-2))
def test_angle_round_trip(off):
    theta = TC + off
    kappa = decay_profile(EwGeometry(N_GLASS, theta, WAIST, 0.01), RB87_D2)[0]
    assert angle_from_decay_constant(kappa, N_GLASS, RB87_D2) == pytest.approx(theta, rel=1e-12)


# -- enhancement


def test_enhancement_published_range():
    assert enhancement_tm(N_GLASS, TC + 0.9e-3) == pytest.approx(6.0, abs=0.1)
    assert enhancement_tm(N_GLASS, TC + 24e-3) == pytest.approx(5.4, abs=0.1)
    grid = [enhancement_tm(N_GLASS, TC + a) for a in np.linspace(0.9e-3, 24e-3, 100)]
    assert np.all(np.diff(grid) < 0)


def test_tm_te_ratio_near_critical():
    theta = TC + 1e-4
    assert enhancement_tm(N_GLASS, theta) / enhancement_te(N_GLASS, theta) == pytest.approx(
        N_GLASS**2, rel=0.01)


def test_wrong_polarization_redirects():
    g = EwGeometry(N_GLASS, TC + 0.01, WAIST, 0.019, Polarization.TE)
    with pytest.raises(ValueError, match="enhancement_te"):
        enhancement_tm(g)
    assert enhancement_te(g) == enhancement(N_GLASS, TC + 0.01, "TE")


def test_enhancement_continuous():
    th = np.linspace(TC + 1e-6, math.pi / 2 - 1e-6, 4000)
    t = np.array([enhancement_tm(N_GLASS, x) for x in th])
    assert np.max(np.abs(np.diff(t))) < 0.05


# -- field quantities


def test_published_saturation_and_light_shift():
    g = EwGeometry.above_critical(N_GLASS, 0.9e-3, WAIST, 19e-3)
    f = make_field(g, RB87_D2, detuning_from_gamma(44, RB87_D2))
    assert f.s0 == pytest.approx(5.1, abs=0.1)
    assert f.u0 / hbar / (2 * math.pi * 1e6) == pytest.approx(670, rel=0.02)


def test_resonant_detuning_rejected():
    with pytest.raises(ResonantDetuningError):
        make_field(EwGeometry.above_critical(N_GLASS, 0.01, WAIST, 0.019), RB87_D2, 0.0)


def test_gaussian_profile_and_decay():
    f = field()
    assert saturation_parameter(f, RB87_D2, 0.0, WAIST) / f.s0 == pytest.approx(math.exp(-2))
    assert saturation_parameter(f, RB87_D2, 1.0) == pytest.approx(0.0, abs=1e-300)
    half = f.decay_length * math.log(2) / 2
    assert dipole_potential(f, RB87_D2, half) == pytest.approx(f.u0 / 2, rel=1e-12)


@given(st.floats(0, 20e-6))
def test_exponential_factorization(z):
    f = field()
    ratio = dipole_potential(f, RB87_D2, z) / dipole_potential(f, RB87_D2, 0.0)
    assert ratio == pytest.approx(math.exp(-2 * f.decay_constant * z), rel=1e-12)


@given(st.floats(0, 5e-6), st.floats(0, 1e-3))
def test_rate_potential_identity(z, r):
    f = field()
    lhs = scattering_rate(f, RB87_D2, z, r) * hbar * f.detuning
    rhs = RB87_D2.linewidth * dipole_potential(f, RB87_D2, z, r)
    assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-300)


def test_red_detuning_gives_negative_potential():
    g = EwGeometry.above_critical(N_GLASS, 0.01, WAIST, 0.019)
    f = make_field(g, RB87_D2, -detuning_from_gamma(44, RB87_D2))
    assert f.u0 < 0


def test_arrays_broadcast():
    f = field()
    z = np.linspace(0, 2e-6, 5)
    assert dipole_potential(f, RB87_D2, z).shape == (5,)


# -- units


def test_detuning_units():
    assert detuning_from_mhz(6.0) == pytest.approx(RB87_D2.linewidth, rel=1e-15)
    d = parse_detuning({"value": 44, "unit": "Gamma"}, RB87_D2)
    assert detuning_to_gamma(d, RB87_D2) == pytest.approx(44)
    mhz = parse_detuning({"value": 264, "unit": "MHz"}, RB87_D2)
    assert mhz == pytest.approx(d, rel=1e-12)
    assert parse_detuning({"value": 0.264, "unit": "GHz"}, RB87_D2) == pytest.approx(d, rel=1e-12)


@pytest.mark.parametrize("bad", [{"value": 1}, {"value": 1, "unit": "Hz"}, 44])
def test_detuning_units_required(bad):
    with pytest.raises(ConfigError):
        parse_detuning(bad, RB87_D2)
