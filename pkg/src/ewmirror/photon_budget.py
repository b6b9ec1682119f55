"""Photons scattered during one bounce.

Four routes:

* :func:`nscat_analytic` -- closed form for the pure exponential barrier,
  N = (Gamma/delta) p_i / (hbar kappa).
* :func:`nscat_path_integral` -- momentum-space integral of
  U_dip / (-dU/dz) between -p_i and +p_i for an arbitrary mirror potential.
* :func:`obe_scattered_photons` -- optical Bloch equations driven by the
  sech^2 light pulse an atom sees while bouncing (saturation).
* :func:`hyperfine_factor` -- multi-level correction from the excited-state
  hyperfine manifold, averaged over ground m_F.

The hyperfine and saturation corrections are composed multiplicatively in
:func:`corrected_prediction`; the empirical roughness offset is added last.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .constants import RB87_D2_HYPERFINE, AtomSpecies, HyperfineModel, hbar
from .errors import DetuningSignError, IntegrationError, NoBounceError
from .ew_optics import EwField
from .mirror_potential import (
    MirrorPotential,
    barrier_maximum,
    total_potential,
    turning_point,
)


def _check_blue(delta: float):
    if not delta > 0:
        raise DetuningSignError("blue detuning (delta > 0) required for a mirror")


def nscat_analytic(species: AtomSpecies, field: EwField, p_incident: float) -> float:
    _check_blue(field.detuning)
    if not p_incident > 0:
        raise ValueError("incident momentum must be positive")
    return species.linewidth / field.detuning * p_incident / (hbar * field.decay_constant)


def nscat_path_integral(species: AtomSpecies, field: EwField, pot: MirrorPotential,
                        p_incident: float, *, rtol: float = 1e-6) -> float:
    """Momentum-space form of the scattered-photon integral.

    Each momentum p in (-p_i, p_i) is mapped to the outermost height z(p) with
    U(z) = (p_i^2 - p^2) / 2M. Gravity is dropped: on the decay-length scale it
    only shifts the energy by M g xi. The integrand is even in p, so the
    integral runs over (0, p_i) and is doubled; the adaptive Gauss-Kronrod
    rule never evaluates the endpoints.
    """
    _check_blue(field.detuning)
    pot = pot.without_gravity()
    m = species.mass
    energy = p_incident**2 / (2 * m)
    height, z_top = barrier_maximum(pot)
    if not height > energy:
        raise NoBounceError(
            f"barrier {height:.4g} J below incident kinetic energy {energy:.4g} J")
    z_turn = turning_point(pot, energy, z_top)
    xi = pot.xi
    big = z_turn + 60 * xi

    def z_of_p(p):
        target = (p_incident**2 - p * p) / (2 * m)
        if target >= energy:
            return z_turn
        f = lambda z: total_potential(pot, z) - target
        hi = z_turn + xi
        while f(hi) > 0:
            hi = z_turn + 2 * (hi - z_turn)
            if hi > big:
                break
        if f(hi) > 0:
            raise IntegrationError(f"root bracketing failed at p={p:.6g} kg m/s")
        return brentq(f, z_turn, hi, xtol=1e-13 * xi, rtol=4 * np.finfo(float).eps)

    def integrand(p):
        z = z_of_p(p)
        return pot.dipole(z) / -pot.gradient(z)

    val, _ = quad(integrand, 0.0, p_incident, epsrel=rtol, epsabs=0.0, limit=200)
    return float(species.linewidth / (hbar * field.detuning) * 2 * val)


def nscat_mirror_average(species: AtomSpecies, field: EwField, p_incident: float, *,
                         c3: float, z_min: float = 10e-9, nodes: int = 24) -> float:
    """Path-integral photon number averaged over the effective mirror area.

    Atoms landing uniformly on the mirror disk sample the local barrier
    u0(r) = u0 exp(-2 r^2/w^2) uniformly in ln u0, from the bounce threshold up
    to the beam-center value. Near the threshold the turning point approaches
    the barrier top where the van der Waals term matters most; the quadrature
    nodes are clustered there.
    """
    from .mirror_potential import MirrorPotential as _MP

    m = species.mass
    energy = p_incident**2 / (2 * m)

    def pot_at(u0):
        return _MP(u0=u0, kappa=field.decay_constant, c3=c3, mg=0.0, z_min=z_min,
                   include_gravity=False, include_vdw=c3 > 0)

    if barrier_maximum(pot_at(field.u0))[0] <= energy:
        raise NoBounceError("no bounce at the beam center")
    if c3 == 0:
        return nscat_path_integral(species, field, pot_at(field.u0), p_incident)
    u_th = brentq(lambda u: barrier_maximum(pot_at(u))[0] - energy, energy, field.u0,
                  xtol=1e-14 * energy, rtol=1e-13)
    x_max = math.log(field.u0 / u_th)
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = (t + 1) / 2
    w = w / 2
    # x = x_max t^2 clusters nodes at the threshold
    x = x_max * t**2
    jac = 2 * x_max * t
    vals = np.array([nscat_path_integral(species, field, pot_at(u_th * math.exp(xx)),
                                         p_incident, rtol=1e-8) for xx in x])
    return float(np.sum(w * jac * vals) / x_max)


# -- optical Bloch equations

@dataclass(frozen=True)
class BlochState:
    excited_population: float
    coherence: complex
    time: float

    def __post_init__(self):
        if not -1e-9 <= self.excited_population <= 1 + 1e-9:
            raise ValueError("excited population outside [0, 1]")


def rabi_from_saturation(s, detuning: float, linewidth: float):
    """Rabi frequency for s = 2 Omega^2 / (Gamma^2 + 4 delta^2)."""
    return np.sqrt(np.asarray(s) * (linewidth**2 + 4 * detuning**2) / 2)


def steady_state_excited(s, *, detuning: float | None = None, linewidth: float | None = None,
                         on_resonance: bool = False):
    """Steady-state excited population.

    With ``on_resonance=False`` (default) ``s`` is the detuned saturation
    parameter and rho_ee = s / (2 (1 + s)). With ``on_resonance=True`` ``s`` is
    I/I_sat and rho_ee = s / (2 (1 + s + (2 delta/Gamma)^2)).
    """
    s = np.asarray(s, dtype=float)
    if on_resonance:
        return s / (2 * (1 + s + (2 * detuning / linewidth) ** 2))
    return s / (2 * (1 + s))


def _bloch_rhs(linewidth, detuning, omega_of_t):
    g, d = linewidth, detuning

    def rhs(t, y):
        u, v, w, _ = y
        om = omega_of_t(t)
        return [d * v - g / 2 * u,
                -d * u - om * w - g / 2 * v,
                om * v - g * (w + 1),
                g * (w + 1) / 2]

    def jac(t, y):
        om = omega_of_t(t)
        return [[-g / 2, d, 0, 0],
                [-d, -g / 2, -om, 0],
                [0, om, -g, 0],
                [0, 0, g / 2, 0]]

    return rhs, jac


@dataclass(frozen=True)
class ObeResult:
    n_scattered: float
    n_lowsat: float
    max_excited: float
    steps: int

    @property
    def ratio(self) -> float:
        return self.n_scattered / self.n_lowsat if self.n_lowsat > 0 else 1.0


def obe_pulse(species: AtomSpecies, pulse_peak_s: float, tau: float, detuning: float, *,
              span: float = 12.0, rtol: float = 1e-8) -> ObeResult:
    """Integrate the two-level Bloch equations for s(t) = s_peak sech^2(t/tau).

    The Bloch vector (u, v, w) is integrated together with the photon count
    dN/dt = Gamma rho_ee, from ground state at t = -span tau to +span tau.
    The coherences ring at the detuning while the drive varies on tau, so an
    implicit (Radau) integrator with an analytic Jacobian is used.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if pulse_peak_s < 0:
        raise ValueError("pulse_peak_s must be non-negative")
    if span < 10:
        raise ValueError("span must cover at least 10 tau on each side")
    g = species.linewidth
    n_low = pulse_peak_s * g * tau
    if pulse_peak_s == 0:
        return ObeResult(0.0, 0.0, 0.0, 0)
    om_peak = float(rabi_from_saturation(pulse_peak_s, detuning, g))
    # Omega ~ sqrt(s) ~ sech
    omega_of_t = lambda t: om_peak / math.cosh(t / tau)
    rhs, jac = _bloch_rhs(g, detuning, omega_of_t)
    t0, t1 = -span * tau, span * tau
    sol = solve_ivp(rhs, (t0, t1), [0.0, 0.0, -1.0, 0.0], method="Radau", jac=jac,
                    rtol=rtol, atol=[1e-12, 1e-12, 1e-12, 1e-12 * max(n_low, 1e-3)],
                    max_step=tau, dense_output=False)
    if not sol.success:
        raise IntegrationError(f"Bloch integration failed: {sol.message} "
                               f"(nfev={sol.nfev}, t={sol.t[-1]:.4g} s)")
    rho_ee = (sol.y[2] + 1) / 2
    return ObeResult(float(sol.y[3, -1]), n_low, float(rho_ee.max()), len(sol.t))


def obe_scattered_photons(species: AtomSpecies, pulse_peak_s: float, tau: float,
                          detuning: float, **kwargs) -> float:
    return obe_pulse(species, pulse_peak_s, tau, detuning, **kwargs).n_scattered


def pulse_duration(kappa: float, p_incident: float, mass: float) -> float:
    """Time constant tau = M / (kappa p_i) of the sech^2 pulse."""
    return mass / (kappa * p_incident)


def pulse_fwhm(tau: float) -> float:
    """Full width at half maximum of sech^2(t/tau)."""
    return 2 * tau * math.acosh(math.sqrt(2))


def turning_point_saturation(species: AtomSpecies, detuning: float, p_incident: float) -> float:
    """Saturation parameter where U_dip equals the incident kinetic energy."""
    return p_incident**2 / (species.mass * hbar * detuning)


def saturation_ratio(species: AtomSpecies, field: EwField, p_incident: float,
                     **kwargs) -> ObeResult:
    """OBE photon number over the unsaturated value for one bounce."""
    tau = pulse_duration(field.decay_constant, p_incident, species.mass)
    s_peak = turning_point_saturation(species, field.detuning, p_incident)
    return obe_pulse(species, s_peak, tau, field.detuning, **kwargs)


# -- hyperfine structure

def _line_detunings(model: HyperfineModel, detuning: float) -> np.ndarray:
    d = detuning - model.offsets()
    if np.any(d <= 0):
        raise DetuningSignError("laser not blue of every hyperfine line")
    return d


def hyperfine_factor_per_m(model: HyperfineModel, detuning: float) -> np.ndarray:
    """Multi-level / two-level photon ratio for each ground m_F.

    All lines share the same exp(-2 kappa z) profile, so along the bounce the
    scattering rate stays proportional to the composite potential and the
    ratio follows from the line sums alone:

        factor_m = delta * sum_F' c^2/delta_F'^2 / sum_F' c^2/delta_F'.
    """
    d = _line_detunings(model, detuning)
    c2 = model.strength_matrix()
    pot = np.sum(c2 / d[:, None], axis=0)
    scat = np.sum(c2 / d[:, None] ** 2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = detuning * scat / pot
    return np.where(pot > 0, out, np.nan)


def hyperfine_factor(model: HyperfineModel, detuning: float) -> float:
    """m_F-averaged hyperfine factor (equal sublevel populations)."""
    per_m = hyperfine_factor_per_m(model, detuning)
    return float(np.nanmean(per_m))


def hyperfine_breakdown(model: HyperfineModel, detuning: float) -> dict[str, dict[str, float]]:
    """Share of each line in the potential and in the scattering rate,
    summed over m_F."""
    d = _line_detunings(model, detuning)
    c2 = model.strength_matrix().sum(axis=1)
    pot = c2 / d
    scat = c2 / d**2
    return {
        line.label: {"potential": float(pot[i] / pot.sum()),
                     "scattering": float(scat[i] / scat.sum())}
        for i, line in enumerate(model.lines)
    }


# -- combined budget

@dataclass(frozen=True)
class ScatterBudget:
    n_twolevel: float
    n_pathintegral: float
    n_obe: float
    hyperfine_factor: float
    n_corrected: float
    roughness_offset: float = 0.0
    saturation_ratio: float = 1.0
    adiabaticity: float = 0.0
    composition: str = "multiplicative"

    def __post_init__(self):
        for name in ("n_twolevel", "n_pathintegral", "n_obe", "n_corrected"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} negative")

    def as_row(self) -> dict[str, float]:
        return {
            "n_twolevel": self.n_twolevel,
            "n_pathintegral": self.n_pathintegral,
            "n_obe": self.n_obe,
            "hyperfine_factor": self.hyperfine_factor,
            "n_corrected": self.n_corrected,
        }


def corrected_prediction(species: AtomSpecies, field: EwField, pot: MirrorPotential,
                         p_incident: float, model: HyperfineModel | None = RB87_D2_HYPERFINE,
                         *, obe: bool = True, hyperfine: bool = True,
                         mirror_average: bool = True,
                         roughness_offset: float = 0.0) -> ScatterBudget:
    """Fill a :class:`ScatterBudget` for one bounce.

    ``pot`` is the beam-center mirror potential; its ``include_vdw`` flag
    switches the van der Waals term. With ``mirror_average`` the path
    integral is averaged over the effective mirror area (atoms hit the mirror
    everywhere inside the bounce radius); otherwise it is evaluated for a
    beam-center atom.
    """
    n2 = nscat_analytic(species, field, p_incident)
    if pot.include_vdw and mirror_average:
        n_path = nscat_mirror_average(species, field, p_incident, c3=pot.c3, z_min=pot.z_min)
    else:
        n_path = nscat_path_integral(species, field, pot, p_incident)
    tau = pulse_duration(field.decay_constant, p_incident, species.mass)
    adiabaticity = 1.0 / (species.linewidth * tau)
    if obe:
        sat = saturation_ratio(species, field, p_incident).ratio
    else:
        sat = 1.0
    n_obe = n_path * sat
    hf = hyperfine_factor(model, field.detuning) if (hyperfine and model is not None) else 1.0
    return ScatterBudget(
        n_twolevel=n2,
        n_pathintegral=n_path,
        n_obe=n_obe,
        hyperfine_factor=hf,
        n_corrected=n_obe * hf + roughness_offset,
        roughness_offset=roughness_offset,
        saturation_ratio=sat,
        adiabaticity=adiabaticity,
    )
