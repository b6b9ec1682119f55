import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import hbar

from conftest import HEIGHT, N_GLASS, WAIST, field, geometry
from ewmirror.constants import G_ACCEL, RB87_D2
from ewmirror.errors import DomainError, NoBounceError
from ewmirror.ew_optics import detuning_from_gamma, enhancement_tm
from ewmirror.mirror_potential import (
    MirrorPotential,
    barrier,
    barrier_maximum,
    bounce_fraction,
    build_potential,
    c3_dielectric,
    decay_length_threshold,
    detuning_threshold,
    effective_mirror_radius,
    fall_energy,
    total_potential,
    turning_point,
)

E_FALL = RB87_D2.mass * G_ACCEL * HEIGHT


# -- oracles


def test_turning_point_closed_form_without_vdw_or_gravity():
    f = field(0.67, 44)
    pot = build_potential(f, RB87_D2, include_vdw=False, include_gravity=False)
    z = turning_point(pot, E_FALL)
    assert z == pytest.approx(math.log(f.u0 / E_FALL) / (2 * f.decay_constant), rel=1e-10)


def test_effective_radius_closed_form_without_vdw():
    f = field(0.67, 44)
    r = effective_mirror_radius(f, RB87_D2, E_FALL, c3=0.0, include_vdw=False)
    assert r == pytest.approx(WAIST * math.sqrt(math.log(f.u0 / E_FALL) / 2), rel=1e-12)


def test_bounce_fraction_gaussian_disk():
    assert bounce_fraction(1.0, 0.0, 1.0) == pytest.approx(1 - math.exp(-0.5), rel=1e-12)
    assert bounce_fraction(1.0, 0.0, 1.0) == pytest.approx(0.393, abs=5e-4)


def test_bounce_fraction_offset_matches_monte_carlo():
    rng = np.random.default_rng(7)
    sigma, off, r = 1.0, 0.8, 1.3
    pts = rng.normal(size=(400_000, 2)) * sigma + [off, 0.0]
    mc = np.mean(np.hypot(pts[:, 0], pts[:, 1]) < r)
    assert bounce_fraction(sigma, off, r) == pytest.approx(mc, abs=5 * math.sqrt(mc * (1 - mc) / 4e5))


def test_detuning_threshold_closed_form_without_vdw():
    g = geometry(0.67)
    t = enhancement_tm(N_GLASS, g.angle)
    intensity = 2 * g.power / (math.pi * WAIST**2)
    # barrier = u0 = hbar Gamma^2 T I / (8 delta I_sat)
    expected = hbar * RB87_D2.linewidth**2 * t * intensity / (8 * RB87_D2.saturation_intensity * E_FALL)
    got = detuning_threshold(g, RB87_D2, fall_height=HEIGHT, include_vdw=False)
    assert got == pytest.approx(expected, rel=1e-9)


def test_c3_value():
    c3 = c3_dielectric(N_GLASS, RB87_D2)
    expected = 3 / 16 * (N_GLASS**2 - 1) / (N_GLASS**2 + 1) * hbar * RB87_D2.linewidth / RB87_D2.k0**3
    assert c3 == pytest.approx(expected, rel=1e-15)
    assert c3 > 0


def test_barrier_maximum_against_brute_force_grid():
    f = field(0.53, 44)
    pot = build_potential(f, RB87_D2, n=N_GLASS)
    h, z = barrier_maximum(pot)
    zs = np.linspace(pot.z_min, 5 * pot.xi, 400_001)
    us = total_potential(pot, zs)
    assert h >= us.max() - 1e-9 * abs(us.max())
    assert z == pytest.approx(zs[np.argmax(us)], abs=1e-4 * pot.xi)


# -- potential shape


def test_vdw_lowers_barrier_monotonically():
    f = field(0.53, 44)
    c3 = c3_dielectric(N_GLASS, RB87_D2)
    heights = [barrier_maximum(build_potential(f, RB87_D2, c3=c3 * k))[0]
               for k in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(heights) < 0)


def test_dipole_scales_as_power_over_detuning():
    base = field(0.67, 44, power=19e-3)
    assert field(0.67, 88, power=38e-3).u0 == pytest.approx(base.u0, rel=1e-12)
    assert field(0.67, 44, power=38e-3).u0 == pytest.approx(2 * base.u0, rel=1e-12)


def test_gravity_negligible_on_decay_length_scale():
    f = field(2.8, 44)
    assert RB87_D2.mass * G_ACCEL * f.decay_length / f.u0 < 1e-4


def test_gradient_matches_finite_difference():
    pot = build_potential(field(0.67, 44), RB87_D2, n=N_GLASS)
    z = np.linspace(50e-9, 3e-6, 7)
    h = 1e-12
    fd = (total_potential(pot, z + h) - total_potential(pot, z - h)) / (2 * h)
    assert np.allclose(pot.gradient(z), fd, rtol=1e-5)


def test_domain_below_cutoff():
    pot = build_potential(field(), RB87_D2, n=N_GLASS)
    with pytest.raises(DomainError):
        total_potential(pot, 1e-9)


def test_build_needs_c3_or_index_for_vdw():
    with pytest.raises(ValueError):
        build_potential(field(), RB87_D2)


def test_invalid_potential_parameters():
    with pytest.raises(ValueError):
        MirrorPotential(u0=1.0, kappa=1e6, c3=-1.0, mg=0.0)
    with pytest.raises(ValueError):
        MirrorPotential(u0=1.0, kappa=1e6, c3=0.0, mg=0.0, z_min=0.0)


# -- barrier and turning point


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95))
def test_turning_point_solves_energy_balance(frac):
    pot = build_potential(field(0.67, 44), RB87_D2, n=N_GLASS)
    h, z_top = barrier_maximum(pot)
    e = frac * h
    z = turning_point(pot, e)
    assert z >= z_top
    assert abs(total_potential(pot, z) - e) <= 1e-6 * e


def test_barrier_report():
    pot = build_potential(field(0.67, 44), RB87_D2, n=N_GLASS)
    rep = barrier(pot, fall_energy(RB87_D2, HEIGHT))
    assert rep.bounces and rep.turning_point > rep.barrier_position
    weak = build_potential(field(0.67, 2000), RB87_D2, n=N_GLASS)
    rep = barrier(weak, E_FALL)
    assert not rep.bounces and rep.turning_point is None
    with pytest.raises(NoBounceError):
        turning_point(weak, E_FALL)


def test_vdw_barrier_sits_inside_evanescent_region():
    pot = build_potential(field(0.53, 44), RB87_D2, n=N_GLASS)
    _, z = barrier_maximum(pot)
    assert pot.z_min < z < pot.xi


def test_effective_radius_shrinks_with_vdw():
    f = field(0.53, 44)
    c3 = c3_dielectric(N_GLASS, RB87_D2)
    r0 = effective_mirror_radius(f, RB87_D2, E_FALL, c3=0.0, include_vdw=False)
    r1 = effective_mirror_radius(f, RB87_D2, E_FALL, c3=c3)
    assert 0 < r1 < r0


def test_bounce_fraction_limits():
    assert bounce_fraction(1e-3, 0.0, 0.0) == 0.0
    assert bounce_fraction(1e-3, 0.0, math.inf) == 1.0
    assert bounce_fraction(1e-3, 5e-4, 2e-3) > bounce_fraction(1e-3, 2e-3, 2e-3)
    with pytest.raises(ValueError):
        bounce_fraction(0.0, 0.0, 1.0)


# -- thresholds


def test_detuning_threshold_is_a_bounce_boundary():
    g = geometry(0.67)
    d = detuning_threshold(g, RB87_D2, fall_height=HEIGHT)
    from ewmirror.ew_optics import make_field

    for k, bounces in ((0.99, True), (1.01, False)):
        pot = build_potential(make_field(g, RB87_D2, d * k), RB87_D2, n=N_GLASS)
        assert (barrier_maximum(pot)[0] > E_FALL) is bounces


def test_detuning_threshold_falls_with_stronger_vdw():
    g = geometry(0.67)
    c3 = c3_dielectric(N_GLASS, RB87_D2)
    values = [detuning_threshold(g, RB87_D2, fall_height=HEIGHT, c3=c3 * k) for k in (0.5, 1, 2)]
    assert values[0] > values[1] > values[2]


def test_decay_length_threshold_boundary():
    delta = detuning_from_gamma(44, RB87_D2)
    th = decay_length_threshold(RB87_D2, 19e-3, delta, HEIGHT)
    assert 50e-9 < th.decay_length < 200e-9
    assert th.angle_above_critical > 0


def test_fixed_enhancement_without_vdw_has_no_lower_limit():
    delta = detuning_from_gamma(44, RB87_D2)
    th = decay_length_threshold(RB87_D2, 19e-3, delta, HEIGHT, include_vdw=False,
                                fixed_enhancement=5.4)
    assert th.decay_length == 0.0
