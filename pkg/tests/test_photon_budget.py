import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import hbar
from scipy.integrate import quad, solve_ivp

from conftest import N_GLASS, field, p_incident
from ewmirror.constants import RB87_D2, RB87_D2_HYPERFINE, two_level_hyperfine
from ewmirror.errors import DetuningSignError, NoBounceError
from ewmirror.ew_optics import make_field
from ewmirror.mirror_potential import MirrorPotential, build_potential
from ewmirror.photon_budget import (
    _bloch_rhs,
    corrected_prediction,
    hyperfine_breakdown,
    hyperfine_factor,
    hyperfine_factor_per_m,
    nscat_analytic,
    nscat_mirror_average,
    nscat_path_integral,
    obe_pulse,
    pulse_duration,
    pulse_fwhm,
    rabi_from_saturation,
    saturation_ratio,
    steady_state_excited,
)

P = p_incident()
G = RB87_D2.linewidth


def exp_potential(f, u0=None):
    return MirrorPotential(u0=f.u0 if u0 is None else u0, kappa=f.decay_constant, c3=0.0,
                           mg=0.0, include_gravity=False, include_vdw=False)


def time_domain_oracle(f):
    """Integrate Gamma U/(hbar delta) along the classical path in the
    pure exponential potential, in the time domain (independent of the
    momentum-space route)."""
    m, k = RB87_D2.mass, f.decay_constant
    e = P**2 / (2 * m)
    v_i = P / m
    # along one leg dt = dz / v with U = E y, dz = -dy / (2 k y), v = v_i sqrt(1 - y);
    # the integral of U dt is then E / (2 k v_i) times a dimensionless integral
    val, _ = quad(lambda y: 1 / math.sqrt(1 - y), 0, 1, epsabs=0, epsrel=1e-12)
    val *= e / (2 * k * v_i)
    return 2 * val * G / (hbar * f.detuning)


# -- oracles


def test_exponential_path_integral_equals_closed_form():
    f = field(0.67, 44)
    n = nscat_path_integral(RB87_D2, f, exp_potential(f), P)
    assert n == pytest.approx(nscat_analytic(RB87_D2, f, P), rel=1e-3)
    assert n == pytest.approx(time_domain_oracle(f), rel=1e-6)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_photon_number_independent_of_barrier_height(c):
    f = field(0.67, 44)
    ref = nscat_path_integral(RB87_D2, f, exp_potential(f), P)
    assert nscat_path_integral(RB87_D2, f, exp_potential(f, f.u0 * c), P) == pytest.approx(ref, rel=1e-6)


def test_hyperfine_factor_brute_force_sum():
    delta = field(0.67, 44).detuning
    per_m = []
    for j in range(5):
        pot = scat = 0.0
        for line in RB87_D2_HYPERFINE.lines:
            c2 = line.strengths[j]
            d = delta - line.offset
            pot += c2 / d
            scat += c2 / d**2
        per_m.append(delta * scat / pot)
    assert hyperfine_factor_per_m(RB87_D2_HYPERFINE, delta) == pytest.approx(per_m, rel=1e-14)
    assert hyperfine_factor(RB87_D2_HYPERFINE, delta) == pytest.approx(np.mean(per_m), rel=1e-14)


def test_obe_constant_drive_reaches_steady_state():
    delta = 10 * G
    s = 3.0
    om = float(rabi_from_saturation(s, delta, G))
    rhs, jac = _bloch_rhs(G, delta, lambda t: om)
    sol = solve_ivp(rhs, (0, 60 / G), [0, 0, -1, 0], method="Radau", jac=jac, rtol=1e-10, atol=1e-12)
    rho = (sol.y[2, -1] + 1) / 2
    assert rho == pytest.approx(steady_state_excited(s), rel=1e-6)


# -- closed form


def test_analytic_count_published_value():
    f = field(2.8, 44)
    assert nscat_analytic(RB87_D2, f, P) == pytest.approx(31.0, abs=1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(20, 400), st.floats(0.5, 3.0))
def test_analytic_count_scaling(delta_gamma, xi_um):
    f = field(xi_um, delta_gamma)
    n = nscat_analytic(RB87_D2, f, P)
    assert n * delta_gamma / xi_um == pytest.approx(
        nscat_analytic(RB87_D2, field(1.0, 1.0), P), rel=1e-9)


def test_red_detuning_rejected():
    f = field()
    red = make_field(__import__("conftest").geometry(), RB87_D2, -f.detuning)
    with pytest.raises(DetuningSignError):
        nscat_analytic(RB87_D2, red, P)


def test_no_bounce_rejected():
    f = field(0.67, 2000)
    with pytest.raises(NoBounceError):
        nscat_path_integral(RB87_D2, f, build_potential(f, RB87_D2, n=N_GLASS), P)


# -- van der Waals


def test_vdw_raises_photon_count_slightly():
    f = field(0.67, 44)
    n0 = nscat_analytic(RB87_D2, f, P)
    nv = nscat_path_integral(RB87_D2, f, build_potential(f, RB87_D2, n=N_GLASS), P)
    assert 1.0 < nv / n0 < 1.05


def test_mirror_average_without_vdw_is_beam_center_value():
    f = field(0.67, 44)
    assert nscat_mirror_average(RB87_D2, f, P, c3=0.0) == pytest.approx(
        nscat_analytic(RB87_D2, f, P), rel=1e-3)


# -- optical Bloch equations


def test_obe_low_saturation_limit():
    delta = 200 * G
    tau = 2e-6
    res = obe_pulse(RB87_D2, 1e-3, tau, delta)
    assert res.ratio == pytest.approx(1.0, rel=2e-3)
    assert res.n_lowsat == pytest.approx(1e-3 * G * tau, rel=1e-12)


def test_pulse_width_microseconds():
    f = field(0.67, 44)
    fwhm = pulse_fwhm(pulse_duration(f.decay_constant, P, RB87_D2.mass))
    assert 3e-6 < fwhm < 10e-6


def test_sech2_fwhm():
    tau = 1.7
    half = pulse_fwhm(tau) / 2
    assert 1 / math.cosh(half / tau) ** 2 == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("dg", [31, 44, 233])
def test_saturation_reduces_and_stays_physical(dg):
    res = saturation_ratio(RB87_D2, field(0.67, dg), P)
    assert 0.85 < res.ratio < 1.0
    assert 0 <= res.max_excited <= 0.5


def test_saturation_weakens_with_detuning():
    ratios = [saturation_ratio(RB87_D2, field(0.67, d), P).ratio for d in (31, 44, 100, 233)]
    assert np.all(np.diff(ratios) > 0)


def test_obe_argument_checks():
    with pytest.raises(ValueError):
        obe_pulse(RB87_D2, 1.0, 0.0, 10 * G)
    with pytest.raises(ValueError):
        obe_pulse(RB87_D2, -1.0, 1e-6, 10 * G)
    assert obe_pulse(RB87_D2, 0.0, 1e-6, 10 * G).n_scattered == 0.0


def test_steady_state_forms_agree():
    delta = 7 * G
    s_res = 4.0
    s_det = s_res / (1 + (2 * delta / G) ** 2)
    a = steady_state_excited(s_det)
    b = steady_state_excited(s_res, detuning=delta, linewidth=G, on_resonance=True)
    assert a == pytest.approx(b, rel=1e-12)
    assert steady_state_excited(1e12) <= 0.5


# -- hyperfine structure


def test_single_line_factor_is_one():
    delta = field(0.67, 44).detuning
    assert hyperfine_factor(two_level_hyperfine(), delta) == pytest.approx(1.0, abs=1e-15)


def test_hyperfine_factor_tends_to_one_far_detuned():
    f = [hyperfine_factor(RB87_D2_HYPERFINE, d * G) for d in (44, 1e3, 1e5)]
    assert f[0] < f[1] < f[2] < 1.0
    assert f[2] == pytest.approx(1.0, abs=1e-3)


def test_hyperfine_factor_published_magnitude():
    assert hyperfine_factor(RB87_D2_HYPERFINE, 44 * G) == pytest.approx(0.91, abs=0.02)


def test_coupling_strengths_in_range():
    s = RB87_D2_HYPERFINE.lines[0].strengths
    assert min(s) >= 1 / 3 - 1e-15 and max(s) <= 3 / 5 + 1e-15


def test_hyperfine_breakdown_sums_to_one():
    b = hyperfine_breakdown(RB87_D2_HYPERFINE, 44 * G)
    assert sum(v["potential"] for v in b.values()) == pytest.approx(1.0)
    assert sum(v["scattering"] for v in b.values()) == pytest.approx(1.0)


def test_hyperfine_needs_blue_of_all_lines():
    with pytest.raises(DetuningSignError):
        hyperfine_factor(RB87_D2_HYPERFINE, -10 * G)


# -- budget


def test_budget_composition():
    f = field(0.67, 44)
    pot = build_potential(f, RB87_D2, n=N_GLASS)
    b = corrected_prediction(RB87_D2, f, pot, P, roughness_offset=3.0)
    assert b.n_obe == pytest.approx(b.n_pathintegral * b.saturation_ratio, rel=1e-14)
    assert b.n_corrected == pytest.approx(b.n_obe * b.hyperfine_factor + 3.0, rel=1e-14)
    assert b.n_twolevel == pytest.approx(nscat_analytic(RB87_D2, f, P))
    plain = corrected_prediction(RB87_D2, f, pot, P, obe=False, hyperfine=False)
    assert plain.n_corrected == plain.n_pathintegral
    assert set(b.as_row()) == {"n_twolevel", "n_pathintegral", "n_obe", "hyperfine_factor", "n_corrected"}
