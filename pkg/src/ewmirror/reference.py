"""Published reference values used by the verification harness.

Each row keeps the quoted source text it was taken from.
"""
from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType


@dataclass(frozen=True)
class ReferenceValue:
    name: str
    value: float | tuple[float, ...]
    unit: str
    citation: str
    uncertainty: float | None = None


_ROWS = (
    ReferenceValue("recoil_velocity", 5.88, "mm/s", "recoil velocity of 87Rb at 780 nm"),
    ReferenceValue("incident_momentum_recoils", 61.0, "hbar k0",
                   "momentum of p_i ~ 61 p_rec"),
    ReferenceValue("bounce_time", 36.7, "ms",
                   "average bouncing time, t_b = 36.7 ms, corresponding to the fall height of 6.6 mm"),
    ReferenceValue("fall_height", 6.6, "mm", "centered 6.6 mm above the horizontal surface"),
    ReferenceValue("decay_lengths_angle_scan", (2.8, 0.67, 0.53), "um",
                   "angle of incidence was varied between 0.9 mrad and 24.0 mrad"),
    ReferenceValue("decay_lengths_trajectories", (1.87, 1.03, 0.79, 0.67, 0.59, 0.53), "um",
                   "decay lengths 1.87, 1.03, 0.79, 0.67, 0.59, 0.53 um"),
    ReferenceValue("enhancement_range", (5.4, 6.0), "",
                   "a factor T, that ranges between 5.4 and 6.0 for our TM polarized EW"),
    ReferenceValue("recoil_range", (2.0, 31.0), "recoils",
                   "2 to 31 photon recoils per atom"),
    ReferenceValue("detuning_threshold_2p8um", 6.5, "GHz",
                   "threshold is calculated as delta_th = 6.5 GHz (8.1 GHz) for xi = 2.8 um (0.67 um)"),
    ReferenceValue("detuning_threshold_0p67um", 8.1, "GHz",
                   "threshold is calculated as delta_th = 6.5 GHz (8.1 GHz) for xi = 2.8 um (0.67 um)"),
    ReferenceValue("decay_length_threshold", 116.0, "nm",
                   "this lower limit is calculated as xi_th = 116 nm"),
    ReferenceValue("angle_threshold_above_critical", 0.59, "rad",
                   "i.e. theta_th = (theta_c + 0.59 rad)"),
    ReferenceValue("vdw_excess", 0.8, "%",
                   "the number of scattered photons would increase only about 0.8 %"),
    ReferenceValue("hyperfine_reduction", 9.0, "%",
                   "N_scat typically 9 % lower than expected for a two-level atom"),
    ReferenceValue("saturation_reduction", 7.0, "%",
                   "approximately 7 % less scattered photons compared with the unsaturated expression"),
    ReferenceValue("bounce_fraction", 13.0, "%", "typical fractions of 13 % for delta = 44 Gamma"),
    ReferenceValue("tilt_offset", 1.5, "recoils",
                   "tilted 12 +- 5 mrad from horizontal. This corresponds to an offset of 1.5 +- 0.6 recoils",
                   uncertainty=0.6),
    ReferenceValue("recoils_19mW", (25.0, 13.0), "recoils",
                   "25 +- 3 (13 +- 2) scattered photons for 19 mW"),
    ReferenceValue("recoils_10p5mW", (23.0, 11.0), "recoils",
                   "23 +- 2 (11 +- 1) photons for 10.5 mW"),
    ReferenceValue("roughness_offset", 3.0, "recoils",
                   "extrapolates to an offset of approximately 3 photon recoils in the limit xi -> 0"),
)

REFERENCE_TABLE = MappingProxyType({r.name: r for r in _ROWS})


def reference(name: str) -> ReferenceValue:
    return REFERENCE_TABLE[name]
