"""Physical constants, the 87Rb D2 species preset and its excited-state
hyperfine data.

Hyperfine splittings and Clebsch-Gordan factors are literature values
(D. A. Steck, "Rubidium 87 D Line Data", rev. 2.2). The line strengths are
squared pi-transition coefficients from 5S1/2 F=2, normalised so that the
cycling transition |2,2> -> |3,3> has strength 1. They are editable: build a
custom :class:`HyperfineModel` if different values are wanted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, k as k_B, physical_constants

__all__ = [
    "G_ACCEL",
    "hbar",
    "k_B",
    "AtomSpecies",
    "RB87_D2",
    "SPECIES_PRESETS",
    "HyperfineLine",
    "HyperfineModel",
    "RB87_D2_HYPERFINE",
    "two_level_hyperfine",
]

G_ACCEL = 9.81  # m/s^2

_AMU = physical_constants["atomic mass constant"][0]


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level atom parameters.

    Attributes
    ----------
    name : str
    wavelength_vacuum : float
        Transition wavelength in vacuum [m].
    linewidth : float
        Natural linewidth Gamma [rad/s].
    saturation_intensity : float
        I_0 [W/m^2].
    mass : float
        [kg]
    """

    name: str
    wavelength_vacuum: float
    linewidth: float
    saturation_intensity: float
    mass: float

    def __post_init__(self):
        for field in ("wavelength_vacuum", "linewidth", "saturation_intensity", "mass"):
            if not getattr(self, field) > 0:
                raise ValueError(f"{field} must be strictly positive")

    @property
    def k0(self) -> float:
        """Vacuum wave number 2 pi / lambda_0 [1/m]."""
        return 2 * np.pi / self.wavelength_vacuum

    @property
    def recoil_velocity(self) -> float:
        """hbar k_0 / M [m/s]."""
        return hbar * self.k0 / self.mass


RB87_D2 = AtomSpecies(
    name="Rb87_D2",
    wavelength_vacuum=780.241e-9,
    linewidth=2 * np.pi * 6.0e6,
    saturation_intensity=16.5,  # 1.65 mW/cm^2
    mass=86.909180520 * _AMU,
)

SPECIES_PRESETS = {RB87_D2.name: RB87_D2}


@dataclass(frozen=True)
class HyperfineLine:
    """One excited hyperfine level seen from the ground level.

    ``offset`` is the angular-frequency position of the line relative to the
    reference (F=2 -> F'=3) transition; lower-lying lines have negative offset.
    ``strengths`` holds the squared coupling per ground m_F, ordered like
    :attr:`HyperfineModel.m_values`.
    """

    label: str
    offset: float
    strengths: tuple[float, ...]


@dataclass(frozen=True)
class HyperfineModel:
    lines: tuple[HyperfineLine, ...]
    m_values: tuple[int, ...]

    def __post_init__(self):
        for line in self.lines:
            if len(line.strengths) != len(self.m_values):
                raise ValueError(f"line {line.label}: one strength per m_F required")
            if any(s < 0 for s in line.strengths):
                raise ValueError(f"line {line.label}: negative strength")

    def strength_matrix(self) -> np.ndarray:
        """Array of shape (n_lines, n_m)."""
        return np.array([line.strengths for line in self.lines], dtype=float)

    def offsets(self) -> np.ndarray:
        return np.array([line.offset for line in self.lines], dtype=float)


_MHZ = 2 * np.pi * 1e6

RB87_D2_HYPERFINE = HyperfineModel(
    lines=(
        HyperfineLine("F'=3", 0.0, (1 / 3, 8 / 15, 3 / 5, 8 / 15, 1 / 3)),
        HyperfineLine("F'=2", -266.650 * _MHZ, (1 / 3, 1 / 12, 0.0, 1 / 12, 1 / 3)),
        HyperfineLine("F'=1", -(266.650 + 156.947) * _MHZ, (0.0, 1 / 20, 1 / 15, 1 / 20, 0.0)),
        HyperfineLine(
            "F'=0", -(266.650 + 156.947 + 72.218) * _MHZ, (0.0, 0.0, 0.0, 0.0, 0.0)
        ),
    ),
    m_values=(-2, -1, 0, 1, 2),
)


def two_level_hyperfine(model: HyperfineModel = RB87_D2_HYPERFINE) -> HyperfineModel:
    """Keep only the reference line; the hyperfine factor is then exactly 1."""
    ref = [line for line in model.lines if line.offset == 0.0]
    return HyperfineModel(lines=tuple(ref), m_values=model.m_values)
