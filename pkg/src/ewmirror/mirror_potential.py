"""Total mirror potential, barrier analysis and bounce thresholds.

U(z) = u0 exp(-2 kappa z) + M g z - C3 / z^3

The van der Waals coefficient defaults to the dielectric-surface form
C3 = (3/16) (n^2 - 1)/(n^2 + 1) hbar Gamma / k0^3; it can be overridden
everywhere through the ``c3`` arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .constants import G_ACCEL, AtomSpecies, hbar
from .errors import DomainError, NoBounceError, ThresholdNotFoundError
from .ew_optics import (
    EwField,
    EwGeometry,
    Polarization,
    angle_from_decay_length,
    critical_angle,
    decay_constant,
    enhancement,
    make_field,
)

DEFAULT_Z_MIN = 10e-9
_GRID_POINTS = 1024


def c3_dielectric(n: float, species: AtomSpecies) -> float:
    """Van der Waals coefficient of a two-level atom facing a dielectric [J m^3]."""
    return 3 / 16 * (n**2 - 1) / (n**2 + 1) * hbar * species.linewidth / species.k0**3


@dataclass(frozen=True)
class MirrorPotential:
    u0: float
    kappa: float
    c3: float
    mg: float
    z_min: float = DEFAULT_Z_MIN
    include_gravity: bool = True
    include_vdw: bool = True

    def __post_init__(self):
        if self.c3 < 0:
            raise ValueError("c3 must be non-negative")
        if not self.z_min > 0:
            raise ValueError("z_min must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def xi(self) -> float:
        return 1.0 / self.kappa

    def dipole(self, z):
        return self.u0 * np.exp(-2 * self.kappa * np.asarray(z, dtype=float))

    def __call__(self, z):
        return total_potential(self, z)

    def gradient(self, z):
        """dU/dz."""
        z = np.asarray(z, dtype=float)
        g = -2 * self.kappa * self.dipole(z)
        if self.include_gravity:
            g = g + self.mg
        if self.include_vdw:
            g = g + 3 * self.c3 / z**4
        return g

    def without_gravity(self) -> "MirrorPotential":
        return replace(self, include_gravity=False)


def total_potential(pot: MirrorPotential, z):
    z = np.asarray(z, dtype=float)
    if np.any(z < pot.z_min) and pot.include_vdw:
        raise DomainError(f"z below z_min={pot.z_min:g} m")
    u = pot.dipole(z)
    if pot.include_gravity:
        u = u + pot.mg * z
    if pot.include_vdw:
        u = u - pot.c3 / z**3
    return u if u.ndim else float(u)


def build_potential(field: EwField, species: AtomSpecies, *, r: float = 0.0,
                    c3: float | None = None, n: float | None = None,
                    include_vdw: bool = True, include_gravity: bool = True,
                    z_min: float = DEFAULT_Z_MIN) -> MirrorPotential:
    """Mirror potential at transverse radius ``r`` of the EW spot.

    Either ``c3`` or the refractive index ``n`` (for the dielectric C3) is
    needed when the van der Waals term is on.
    """
    if c3 is None:
        if n is None:
            if include_vdw:
                raise ValueError("give c3 or the refractive index n")
            c3 = 0.0
        else:
            c3 = c3_dielectric(n, species)
    u0 = field.u0 * math.exp(-2 * r**2 / field.waist**2)
    return MirrorPotential(u0=u0, kappa=field.decay_constant, c3=c3,
                           mg=species.mass * G_ACCEL, z_min=z_min,
                           include_gravity=include_gravity, include_vdw=include_vdw)


@dataclass(frozen=True)
class BarrierReport:
    barrier_height: float
    barrier_position: float
    bounces: bool
    turning_point: float | None


def barrier_maximum(pot: MirrorPotential) -> tuple[float, float]:
    """Locate the barrier top: ``(height, position)``.

    Without van der Waals the maximum sits on the surface (z = 0, U = u0).
    Otherwise a log-spaced grid on [z_min, 10 xi] brackets the maximum and a
    bounded scalar search refines it well below 1e-4 xi.
    """
    if not pot.include_vdw:
        return pot.u0, 0.0
    xi = pot.xi
    z_hi = max(10 * xi, 10 * pot.z_min)
    zs = np.geomspace(pot.z_min, z_hi, _GRID_POINTS)
    us = total_potential(pot, zs)
    i = int(np.argmax(us))
    if i == 0:
        return float(us[0]), float(zs[0])
    lo, hi = zs[i - 1], zs[min(i + 1, len(zs) - 1)]
    res = minimize_scalar(lambda z: -total_potential(pot, z), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-6 * xi})
    if -res.fun >= us[i]:
        return float(-res.fun), float(res.x)
    return float(us[i]), float(zs[i])


def turning_point(pot: MirrorPotential, energy: float, z_start: float | None = None) -> float:
    """Outermost root of U(z) = energy inside the evanescent region.

    The gravitational root far above the surface is excluded: the search is
    bracketed from the barrier top up to a few decay lengths past the
    pure-exponential turning point.
    """
    if z_start is None:
        _, z_start = barrier_maximum(pot)
    z_lo = max(z_start, pot.z_min if pot.include_vdw else 0.0)
    f = lambda z: total_potential(pot, z) - energy
    if f(z_lo) < 0:
        raise NoBounceError("energy exceeds the barrier")
    if f(z_lo) == 0:
        return z_lo
    z_hi = z_lo + max(math.log(max(pot.u0 / energy, 1.0)) / (2 * pot.kappa), 0) + 10 * pot.xi
    while f(z_hi) > 0:
        z_hi = z_lo + 2 * (z_hi - z_lo)
        if pot.include_gravity and z_hi > energy / pot.mg:
            raise NoBounceError("no turning point inside the evanescent region")
    z = brentq(f, z_lo, z_hi, xtol=1e-12 * pot.xi, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    return float(z)


def barrier(pot: MirrorPotential, e_incident: float) -> BarrierReport:
    """Barrier height/position and the turning point for ``e_incident``."""
    if not e_incident > 0:
        raise ValueError("incident energy must be positive")
    height, position = barrier_maximum(pot)
    bounces = height > e_incident
    tp = turning_point(pot, e_incident, position) if bounces else None
    return BarrierReport(height, position, bounces, tp)


def fall_energy(species: AtomSpecies, fall_height: float) -> float:
    return species.mass * G_ACCEL * fall_height


def detuning_threshold(geom: EwGeometry, species: AtomSpecies, power: float | None = None,
                       fall_height: float = 6.6e-3, *, c3: float | None = None,
                       include_vdw: bool = True, z_min: float = DEFAULT_Z_MIN) -> float:
    """Largest blue detuning [rad/s] for which a beam-center atom still bounces."""
    if power is not None:
        geom = replace(geom, power=power)
    if not geom.power > 0 or not fall_height > 0:
        raise ValueError("power and fall height must be positive")
    e = fall_energy(species, fall_height)
    if c3 is None:
        c3 = c3_dielectric(geom.refractive_index, species)

    def margin(log_delta):
        field = make_field(geom, species, math.exp(log_delta))
        pot = build_potential(field, species, c3=c3, include_vdw=include_vdw, z_min=z_min)
        return barrier_maximum(pot)[0] - e

    lo = math.log(species.linewidth)
    if margin(lo) <= 0:
        raise ThresholdNotFoundError("no bounce even at one linewidth detuning")
    hi = lo + 1.0
    while margin(hi) > 0:
        hi += 1.0
        if hi - lo > 60:
            raise ThresholdNotFoundError("detuning threshold not bracketed")
    return math.exp(brentq(margin, lo, hi, xtol=1e-12, rtol=1e-12))


@dataclass(frozen=True)
class DecayLengthThreshold:
    decay_length: float
    angle: float
    angle_above_critical: float


def decay_length_threshold(species: AtomSpecies, power: float, detuning: float,
                           fall_height: float = 6.6e-3, *, n: float = 1.51,
                           waist: float = 335e-6,
                           polarization: Polarization = Polarization.TM,
                           c3: float | None = None, include_vdw: bool = True,
                           fixed_enhancement: float | None = None,
                           z_min: float = DEFAULT_Z_MIN) -> DecayLengthThreshold:
    """Smallest decay length that still reflects a beam-center atom.

    By default the Fresnel enhancement follows the angle of incidence, which
    drives the potential to zero at grazing incidence; the search runs over
    the angle. With ``fixed_enhancement`` the surface intensity is held fixed
    and the search runs over the decay length directly; in that case the
    optical barrier is decay-length independent and, without van der Waals,
    there is no lower limit (a zero decay length is returned).
    """
    e = fall_energy(species, fall_height)
    if c3 is None:
        c3 = c3_dielectric(n, species)
    theta_c = critical_angle(n)
    intensity = 2 * power / (math.pi * waist**2)
    pref = hbar * detuning / 2 * (species.linewidth / (2 * detuning)) ** 2 \
        * intensity / species.saturation_intensity

    def barrier_at(kappa, t):
        pot = MirrorPotential(u0=pref * t, kappa=kappa, c3=c3, mg=species.mass * G_ACCEL,
                              z_min=z_min, include_vdw=include_vdw)
        return barrier_maximum(pot)[0] - e

    if fixed_enhancement is not None:
        if not include_vdw:
            if pref * fixed_enhancement <= e:
                raise ThresholdNotFoundError("no bounce at any decay length")
            return DecayLengthThreshold(0.0, math.pi / 2, math.pi / 2 - theta_c)
        f = lambda log_xi: barrier_at(math.exp(-log_xi), fixed_enhancement)
        lo, hi = math.log(1e-10), math.log(1e-3)
        if f(hi) <= 0:
            raise ThresholdNotFoundError("no bounce at any decay length")
        if f(lo) > 0:
            return DecayLengthThreshold(0.0, math.pi / 2, math.pi / 2 - theta_c)
        xi = math.exp(brentq(f, lo, hi, xtol=1e-12))
        try:
            theta = angle_from_decay_length(xi, n, species)
        except ValueError:
            theta = float("nan")
        return DecayLengthThreshold(xi, theta, theta - theta_c)

    def g(theta):
        return barrier_at(decay_constant(n, theta, species),
                          enhancement(n, theta, polarization))

    lo = theta_c + 1e-6
    hi = math.pi / 2 - 1e-9
    if g(lo) <= 0:
        raise ThresholdNotFoundError("no bounce even near the critical angle")
    if g(hi) > 0:
        theta = hi
    else:
        theta = brentq(g, lo, hi, xtol=1e-13)
    xi = 1.0 / decay_constant(n, theta, species)
    return DecayLengthThreshold(xi, theta, theta - theta_c)


def local_barrier_height(field: EwField, species: AtomSpecies, r, *, c3: float,
                         include_vdw: bool = True, z_min: float = DEFAULT_Z_MIN):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.array([
        barrier_maximum(build_potential(field, species, r=ri, c3=c3,
                                        include_vdw=include_vdw, z_min=z_min))[0]
        for ri in r
    ])
    return out


def effective_mirror_radius(field: EwField, species: AtomSpecies, e_incident: float, *,
                            c3: float, include_vdw: bool = True,
                            z_min: float = DEFAULT_Z_MIN) -> float:
    """Radius where the local barrier equals ``e_incident``; 0 if no bounce at center."""
    def margin(r):
        pot = build_potential(field, species, r=r, c3=c3, include_vdw=include_vdw,
                              z_min=z_min)
        return barrier_maximum(pot)[0] - e_incident

    if margin(0.0) <= 0:
        return 0.0
    w = field.waist
    if not include_vdw:
        return w * math.sqrt(math.log(field.u0 / e_incident) / 2)
    hi = w
    while margin(hi) > 0:
        hi *= 2
    return float(brentq(margin, 0.0, hi, xtol=1e-12 * w, rtol=1e-12))


def bounce_fraction(cloud_sigma: float, mot_offset: float, r_eff: float) -> float:
    """Fraction of a 2-D Gaussian cloud (rms ``cloud_sigma`` per axis) whose
    center is displaced by ``mot_offset`` that lands inside a disk of radius
    ``r_eff``. This is the CDF of the Rice distribution.
    """
    if not cloud_sigma > 0:
        raise ValueError("cloud_sigma must be positive")
    if r_eff <= 0:
        return 0.0
    if math.isinf(r_eff):
        return 1.0
    if mot_offset == 0:
        return -math.expm1(-(r_eff**2) / (2 * cloud_sigma**2))
    from scipy.stats import rice

    return float(rice.cdf(r_eff / cloud_sigma, abs(mot_offset) / cloud_sigma))
