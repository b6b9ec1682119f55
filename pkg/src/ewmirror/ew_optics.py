"""Evanescent-wave geometry and field quantities.

All quantities are SI. Angles are radians, detunings angular frequencies
(rad/s, positive = blue). The Gaussian EW beam is treated as collimated, so
one angle of incidence maps to one decay constant.

Fresnel convention: ``T`` is the ratio between the EW intensity at the
surface (both TM field components) and the beam intensity inside the glass,

    T_TM = |t_p|^2 (2 n^2 sin^2(theta) - 1) / n,
    t_p  = 2 n cos(theta) / (cos(theta) + i n sqrt(n^2 sin^2(theta) - 1)),

    T_TE = |t_s|^2 / n,
    t_s  = 2 n cos(theta) / (n cos(theta) + i sqrt(n^2 sin^2(theta) - 1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import AtomSpecies, hbar
from .errors import (
    ConfigError,
    InvalidMediumError,
    ResonantDetuningError,
    SupercriticalAngleError,
)

_MHZ = 2 * np.pi * 1e6


class Polarization(str, Enum):
    TM = "TM"
    TE = "TE"


# -- detuning units

def detuning_from_mhz(value: float) -> float:
    """Detuning given in MHz (cycles) -> rad/s."""
    return _MHZ * value


def detuning_from_gamma(value: float, species: AtomSpecies) -> float:
    """Detuning given in units of the linewidth -> rad/s."""
    return value * species.linewidth


def detuning_to_mhz(delta: float) -> float:
    return delta / _MHZ


def detuning_to_gamma(delta: float, species: AtomSpecies) -> float:
    return delta / species.linewidth


def parse_detuning(tagged: dict, species: AtomSpecies) -> float:
    """Convert a unit-tagged detuning ``{"value": 44, "unit": "Gamma"}``.

    Accepted units: ``Gamma``, ``MHz``, ``GHz``, ``rad/s``.
    """
    try:
        value = float(tagged["value"])
        unit = tagged["unit"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"detuning must be {{'value': x, 'unit': u}}, got {tagged!r}") from exc
    if unit == "Gamma":
        return detuning_from_gamma(value, species)
    if unit == "MHz":
        return detuning_from_mhz(value)
    if unit == "GHz":
        return detuning_from_mhz(1e3 * value)
    if unit == "rad/s":
        return value
    raise ConfigError(f"unknown detuning unit {unit!r}")


# -- geometry

def critical_angle(n: float) -> float:
    """Critical angle of total internal reflection, arcsin(1/n)."""
    if not n > 1:
        raise InvalidMediumError(f"refractive index must exceed 1, got {n}")
    return math.asin(1.0 / n)


def telescope_angle(delta_a: float, focal_length: float, n: float) -> float:
    """Angle change produced by displacing the first relay-telescope lens."""
    if not focal_length > 0:
        raise ValueError("focal length must be positive")
    return delta_a / (focal_length * n)


@dataclass(frozen=True)
class EwGeometry:
    """Prism and EW beam.

    Attributes
    ----------
    refractive_index : float
    angle : float
        Angle of incidence in the glass [rad].
    waist : float
        1/e^2 intensity radius at the surface [m].
    power : float
        Beam power [W].
    polarization : Polarization
    """

    refractive_index: float
    angle: float
    waist: float
    power: float
    polarization: Polarization = Polarization.TM

    def __post_init__(self):
        theta_c = critical_angle(self.refractive_index)
        if not theta_c < self.angle < math.pi / 2:
            raise SupercriticalAngleError(
                f"angle {self.angle:.6g} rad not in (theta_c={theta_c:.6g}, pi/2)"
            )
        if not self.waist > 0:
            raise ValueError("waist must be positive")
        if self.power < 0:
            raise ValueError("power must be non-negative")
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    @classmethod
    def above_critical(cls, n: float, offset: float, waist: float, power: float,
                       polarization=Polarization.TM) -> "EwGeometry":
        """Geometry with angle ``theta_c + offset`` (offset in rad)."""
        return cls(n, critical_angle(n) + offset, waist, power, polarization)

    @property
    def critical_angle(self) -> float:
        return critical_angle(self.refractive_index)

    @property
    def offset(self) -> float:
        """Angle above the critical angle [rad]."""
        return self.angle - self.critical_angle

    def peak_intensity(self) -> float:
        """Beam-center intensity in the glass, 2P / (pi w^2)."""
        return 2 * self.power / (math.pi * self.waist**2)

    def intensity(self, r):
        """Gaussian beam intensity at transverse radius ``r``."""
        r = np.asarray(r, dtype=float)
        return self.peak_intensity() * np.exp(-2 * r**2 / self.waist**2)


def _check_supercritical(n: float, theta: float) -> float:
    theta_c = critical_angle(n)
    if not theta > theta_c:
        raise SupercriticalAngleError(
            f"angle {theta:.6g} rad must exceed critical angle {theta_c:.6g} rad"
        )
    return theta_c


def decay_constant(n: float, theta: float, species: AtomSpecies) -> float:
    _check_supercritical(n, theta)
    return species.k0 * math.sqrt((n * math.sin(theta)) ** 2 - 1)


def decay_profile(geom: EwGeometry, species: AtomSpecies) -> tuple[float, float, float]:
    """Return ``(kappa, xi, kx)`` for the geometry.

    kappa = k0 sqrt(n^2 sin^2 theta - 1), xi = 1/kappa, kx = k0 n sin theta.
    """
    n, theta = geom.refractive_index, geom.angle
    kappa = decay_constant(n, theta, species)
    kx = species.k0 * n * math.sin(theta)
    return kappa, 1.0 / kappa, kx


def angle_from_decay_constant(kappa: float, n: float, species: AtomSpecies) -> float:
    """Invert :func:`decay_constant` for the angle of incidence."""
    if not kappa > 0:
        raise SupercriticalAngleError("decay constant must be positive")
    sin_theta = math.sqrt((kappa / species.k0) ** 2 + 1) / n
    if sin_theta >= 1:
        raise SupercriticalAngleError(
            f"decay constant {kappa:.4g} 1/m unreachable for n={n} "
            f"(max {species.k0 * math.sqrt(n * n - 1):.4g} 1/m at grazing incidence)"
        )
    return math.asin(sin_theta)


def angle_from_decay_length(xi: float, n: float, species: AtomSpecies) -> float:
    return angle_from_decay_constant(1.0 / xi, n, species)


def fresnel_tp(n: float, theta: float) -> complex:
    c = math.cos(theta)
    q = math.sqrt((n * math.sin(theta)) ** 2 - 1)
    return 2 * n * c / complex(c, n * q)


def fresnel_ts(n: float, theta: float) -> complex:
    c = math.cos(theta)
    q = math.sqrt((n * math.sin(theta)) ** 2 - 1)
    return 2 * n * c / complex(n * c, q)


def enhancement_tm(geom_or_n, theta: float | None = None) -> float:
    """Surface intensity enhancement T for TM polarization.

    Accepts either an :class:`EwGeometry` or ``(n, theta)``.
    """
    n, theta = _n_theta(geom_or_n, theta, Polarization.TM)
    _check_supercritical(n, theta)
    s2 = (n * math.sin(theta)) ** 2
    return abs(fresnel_tp(n, theta)) ** 2 * (2 * s2 - 1) / n


def enhancement_te(geom_or_n, theta: float | None = None) -> float:
    n, theta = _n_theta(geom_or_n, theta, Polarization.TE)
    _check_supercritical(n, theta)
    return abs(fresnel_ts(n, theta)) ** 2 / n


def enhancement(n: float, theta: float, polarization=Polarization.TM) -> float:
    if Polarization(polarization) is Polarization.TM:
        return enhancement_tm(n, theta)
    return enhancement_te(n, theta)


def _n_theta(geom_or_n, theta, expected):
    if isinstance(geom_or_n, EwGeometry):
        if geom_or_n.polarization is not expected:
            other = "enhancement_te" if expected is Polarization.TM else "enhancement_tm"
            raise ValueError(f"{geom_or_n.polarization.value} polarization: use {other}")
        return geom_or_n.refractive_index, geom_or_n.angle
    if theta is None:
        raise TypeError("angle required when passing a refractive index")
    return float(geom_or_n), float(theta)


# -- field

@dataclass(frozen=True)
class EwField:
    """Evanescent field derived from a geometry, species and detuning.

    ``u0`` is the dipole potential at the beam center on the surface.
    """

    decay_constant: float
    decay_length: float
    kx: float
    enhancement: float
    peak_intensity_glass: float
    waist: float
    detuning: float
    s0: float
    u0: float


def make_field(geom: EwGeometry, species: AtomSpecies, detuning: float) -> EwField:
    if detuning == 0:
        raise ResonantDetuningError("detuning must be non-zero")
    kappa, xi, kx = decay_profile(geom, species)
    t = enhancement(geom.refractive_index, geom.angle, geom.polarization)
    intensity = geom.peak_intensity()
    s0 = (species.linewidth / (2 * detuning)) ** 2 * t * intensity / species.saturation_intensity
    return EwField(
        decay_constant=kappa,
        decay_length=xi,
        kx=kx,
        enhancement=t,
        peak_intensity_glass=intensity,
        waist=geom.waist,
        detuning=detuning,
        s0=s0,
        u0=hbar * detuning * s0 / 2,
    )


def saturation_parameter(field: EwField, species: AtomSpecies, z, r=0.0):
    """Local saturation parameter s(z, r) for the Gaussian EW spot."""
    if field.detuning == 0:
        raise ResonantDetuningError("detuning must be non-zero")
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    s = field.s0 * np.exp(-2 * r**2 / field.waist**2) * np.exp(-2 * field.decay_constant * z)
    return s if s.ndim else float(s)


def dipole_potential(field: EwField, species: AtomSpecies, z, r=0.0):
    """Light-shift potential hbar delta s / 2 [J]."""
    return hbar * field.detuning * saturation_parameter(field, species, z, r) / 2


def scattering_rate(field: EwField, species: AtomSpecies, z, r=0.0):
    """Low-saturation photon scattering rate s Gamma / 2 [1/s]."""
    return saturation_parameter(field, species, z, r) * species.linewidth / 2
