"""Radiation pressure on atoms bouncing off an evanescent-wave mirror."""
from .constants import RB87_D2, RB87_D2_HYPERFINE, AtomSpecies
from .ew_optics import EwGeometry, Polarization, make_field
from .mirror_potential import MirrorPotential, build_potential
from .photon_budget import ScatterBudget, corrected_prediction, nscat_analytic

__version__ = "0.1.0"

__all__ = [
    "AtomSpecies",
    "EwGeometry",
    "MirrorPotential",
    "Polarization",
    "RB87_D2",
    "RB87_D2_HYPERFINE",
    "ScatterBudget",
    "build_potential",
    "corrected_prediction",
    "make_field",
    "nscat_analytic",
]
