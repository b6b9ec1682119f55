"""Experiment configuration as a unit-tagged JSON document.

Scalars are either bare SI numbers or ``{"value": x, "unit": "..."}``; the
detuning must carry a unit. Values are stored in SI internally and written
back in SI, so parse -> serialize -> parse is the identity.

Example::

    {
      "species": "Rb87_D2",
      "geometry": {
        "refractive_index": 1.51,
        "angle": {"value": 15.2, "unit": "mrad_above_critical"},
        "waist": {"value": 335, "unit": "um"},
        "power": {"value": 19, "unit": "mW"},
        "polarization": "TM"
      },
      "detuning": {"value": 44, "unit": "Gamma"},
      "fall_height": {"value": 6.6, "unit": "mm"}
    }

The angle may instead be given through the relay telescope,
``"telescope": {"delta_a": {"value": 1.7, "unit": "mm"}, "focal_length": ...}``,
giving theta = theta_c + delta_a / (f n). Exactly one of the two is allowed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .bounce_dynamics import CloudConfig, Systematics
from .constants import SPECIES_PRESETS, AtomSpecies
from .errors import ConfigError
from .ew_optics import (
    EwGeometry,
    Polarization,
    angle_from_decay_length,
    critical_angle,
    parse_detuning,
    telescope_angle,
)
from .virtual_diagnostics import CcdSpec

_UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "power": {"W": 1.0, "mW": 1e-3},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "velocity": {"m/s": 1.0, "mm/s": 1e-3},
    "angle": {"rad": 1.0, "mrad": 1e-3, "deg": math.pi / 180},
    "dimensionless": {"": 1.0, "1": 1.0},
}
_SI = {"length": "m", "power": "W", "temperature": "K", "time": "s", "velocity": "m/s",
       "angle": "rad", "dimensionless": ""}


def parse_quantity(raw, dimension: str, name: str) -> float:
    if isinstance(raw, bool):
        raise ConfigError(f"{name}: expected a number")
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, dict) and "value" in raw:
        unit = raw.get("unit", _SI[dimension])
        try:
            return float(raw["value"]) * _UNITS[dimension][unit]
        except KeyError:
            raise ConfigError(f"{name}: unit {unit!r} is not a {dimension} unit") from None
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: value must be numeric") from None
    raise ConfigError(f"{name}: expected a number or {{'value', 'unit'}}, got {raw!r}")


def _tag(value: float, dimension: str):
    return {"value": value, "unit": _SI[dimension]}


@dataclass(frozen=True)
class GeometryConfig:
    refractive_index: float = 1.51
    angle: float | None = None
    delta_a: float | None = None
    focal_length: float | None = None
    waist: float = 335e-6
    power: float = 19e-3
    polarization: str = "TM"

    def resolved_angle(self) -> float:
        if self.angle is not None:
            return self.angle
        return critical_angle(self.refractive_index) + telescope_angle(
            self.delta_a, self.focal_length, self.refractive_index)

    def to_geometry(self) -> EwGeometry:
        return EwGeometry(self.refractive_index, self.resolved_angle(), self.waist, self.power,
                          Polarization(self.polarization))


@dataclass(frozen=True)
class Corrections:
    vdw: bool = True
    hyperfine: bool = True
    obe: bool = True
    roughness_offset: float = 0.0
    c3: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    species: str = "Rb87_D2"
    geometry: GeometryConfig = field(default_factory=lambda: GeometryConfig(angle=_default_angle()))
    detuning: float = 2 * math.pi * 6.0e6 * 44
    fall_height: float = 6.6e-3
    temperature: float = 10e-6
    n_atoms: int = 100_000
    mot_sigma: float = 0.3e-3
    systematics: Systematics = field(default_factory=Systematics)
    ccd: CcdSpec = field(default_factory=CcdSpec)
    corrections: Corrections = field(default_factory=Corrections)
    scattering: str = "mean"
    soft_mirror_edge: bool = True
    antithetic: bool = False
    snapshot_times: tuple[float, ...] = tuple(round(5e-3 + 10e-3 * i, 6) for i in range(10))
    seed: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.species not in SPECIES_PRESETS:
            raise ConfigError(f"unknown species {self.species!r}; known: {sorted(SPECIES_PRESETS)}")
        g = self.geometry
        if (g.angle is None) == (g.delta_a is None):
            raise ConfigError("give exactly one of geometry.angle and geometry.telescope")
        if g.delta_a is not None and not (g.focal_length or 0) > 0:
            raise ConfigError("telescope focal_length must be positive")
        for name in ("fall_height", "temperature", "mot_sigma"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.detuning == 0:
            raise ConfigError("detuning must be non-zero")
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be at least 1")
        if self.scattering not in ("mean", "stochastic", "off"):
            raise ConfigError(f"scattering must be mean, stochastic or off, not {self.scattering!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        try:
            self.geometry.to_geometry()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def atom(self) -> AtomSpecies:
        return SPECIES_PRESETS[self.species]

    def ew_geometry(self) -> EwGeometry:
        return self.geometry.to_geometry()

    def cloud_config(self, **overrides) -> CloudConfig:
        c = self.corrections
        kw = dict(geometry=self.ew_geometry(), detuning=self.detuning, species=self.atom,
                  fall_height=self.fall_height, temperature=self.temperature,
                  n_atoms=self.n_atoms, mot_sigma=self.mot_sigma, systematics=self.systematics,
                  c3=c.c3, include_vdw=c.vdw, hyperfine=c.hyperfine, obe=c.obe,
                  scattering=self.scattering, soft_mirror_edge=self.soft_mirror_edge,
                  antithetic=self.antithetic)
        kw.update(overrides)
        return CloudConfig(**kw)

    def with_detuning(self, detuning: float) -> "ExperimentConfig":
        return replace(self, detuning=detuning)

    def with_angle(self, angle: float) -> "ExperimentConfig":
        return replace(self, geometry=replace(self.geometry, angle=angle, delta_a=None,
                                              focal_length=None))

    def with_power(self, power: float) -> "ExperimentConfig":
        return replace(self, geometry=replace(self.geometry, power=power))

    # -- (de)serialization

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        species = d.get("species", "Rb87_D2")
        if species not in SPECIES_PRESETS:
            raise ConfigError(f"unknown species {species!r}")
        atom = SPECIES_PRESETS[species]
        kw: dict = {"species": species}
        if "geometry" in d:
            kw["geometry"] = _parse_geometry(d["geometry"], atom)
        if "detuning" in d:
            if not isinstance(d["detuning"], dict):
                raise ConfigError("detuning needs a unit tag, e.g. {'value': 44, 'unit': 'Gamma'}")
            kw["detuning"] = parse_detuning(d["detuning"], atom)
        for name, dim in (("fall_height", "length"), ("temperature", "temperature"),
                          ("mot_sigma", "length")):
            if name in d:
                kw[name] = parse_quantity(d[name], dim, name)
        for name in ("n_atoms", "seed"):
            if name in d:
                kw[name] = _int(d[name], name)
        for name in ("scattering", "output_dir"):
            if name in d:
                kw[name] = str(d[name])
        for name in ("soft_mirror_edge", "antithetic"):
            if name in d:
                kw[name] = bool(d[name])
        if "snapshot_times" in d:
            kw["snapshot_times"] = tuple(parse_quantity(t, "time", "snapshot_times")
                                         for t in d["snapshot_times"])
        if "systematics" in d:
            kw["systematics"] = _parse_systematics(d["systematics"], atom)
        if "ccd" in d:
            kw["ccd"] = _parse_ccd(d["ccd"])
        if "corrections" in d:
            kw["corrections"] = _parse_corrections(d["corrections"])
        return cls(**kw)

    def to_dict(self) -> dict:
        g = self.geometry
        geo = {"refractive_index": g.refractive_index, "waist": _tag(g.waist, "length"),
               "power": _tag(g.power, "power"), "polarization": g.polarization}
        if g.angle is not None:
            geo["angle"] = _tag(g.angle, "angle")
        else:
            geo["telescope"] = {"delta_a": _tag(g.delta_a, "length"),
                                "focal_length": _tag(g.focal_length, "length")}
        s = self.systematics
        return {
            "species": self.species,
            "geometry": geo,
            "detuning": {"value": self.detuning, "unit": "rad/s"},
            "fall_height": _tag(self.fall_height, "length"),
            "temperature": _tag(self.temperature, "temperature"),
            "n_atoms": self.n_atoms,
            "mot_sigma": _tag(self.mot_sigma, "length"),
            "systematics": {
                "prism_tilt": _tag(s.prism_tilt, "angle"),
                "prism_tilt_err": _tag(s.prism_tilt_err, "angle"),
                "mot_horizontal_offset": _tag(s.mot_horizontal_offset, "length"),
                "launch_velocity": _tag(s.launch_velocity, "velocity"),
                "launch_velocity_err": _tag(s.launch_velocity_err, "velocity"),
                "roughness_offset_recoils": s.roughness_offset_recoils,
            },
            "ccd": {
                "rows": self.ccd.rows, "cols": self.ccd.cols,
                "pixel_pitch": _tag(self.ccd.pixel_pitch, "length"),
                "exposure": _tag(self.ccd.exposure, "time"),
                "origin_row": self.ccd.origin_row, "origin_col": self.ccd.origin_col,
                "psf_sigma_px": self.ccd.psf_sigma_px, "photon_yield": self.ccd.photon_yield,
                "shots_per_frame": self.ccd.shots_per_frame,
            },
            "corrections": asdict(self.corrections),
            "scattering": self.scattering,
            "soft_mirror_edge": self.soft_mirror_edge,
            "antithetic": self.antithetic,
            "snapshot_times": [_tag(t, "time") for t in self.snapshot_times],
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _default_angle() -> float:
    return critical_angle(1.51) + 15.2e-3


def _int(raw, name) -> int:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw != int(raw):
        raise ConfigError(f"{name} must be an integer")
    return int(raw)


def _parse_geometry(d: dict, atom: AtomSpecies) -> GeometryConfig:
    if not isinstance(d, dict):
        raise ConfigError("geometry must be an object")
    allowed = {"refractive_index", "angle", "telescope", "waist", "power", "polarization"}
    if set(d) - allowed:
        raise ConfigError(f"unknown geometry keys: {sorted(set(d) - allowed)}")
    n = float(d.get("refractive_index", 1.51))
    if not n > 1:
        raise ConfigError(f"refractive index must exceed 1, got {n}")
    if ("angle" in d) == ("telescope" in d):
        raise ConfigError("give exactly one of geometry.angle and geometry.telescope")
    kw = {"refractive_index": n}
    if "angle" in d:
        kw["angle"] = _parse_angle(d["angle"], n, atom)
    else:
        tel = d["telescope"]
        kw["delta_a"] = parse_quantity(tel.get("delta_a"), "length", "telescope.delta_a")
        kw["focal_length"] = parse_quantity(tel.get("focal_length"), "length",
                                            "telescope.focal_length")
    if "waist" in d:
        kw["waist"] = parse_quantity(d["waist"], "length", "waist")
    if "power" in d:
        kw["power"] = parse_quantity(d["power"], "power", "power")
    if "polarization" in d:
        try:
            kw["polarization"] = Polarization(d["polarization"]).value
        except ValueError:
            raise ConfigError(f"polarization must be TM or TE, got {d['polarization']!r}") from None
    return GeometryConfig(**kw)


def _parse_angle(raw, n: float, atom: AtomSpecies) -> float:
    """Angle of incidence; besides plain angle units accepts
    ``mrad_above_critical``, ``rad_above_critical`` and ``decay_length_um``."""
    if isinstance(raw, dict) and raw.get("unit") in ("mrad_above_critical", "rad_above_critical"):
        scale = 1e-3 if raw["unit"].startswith("mrad") else 1.0
        return critical_angle(n) + float(raw["value"]) * scale
    if isinstance(raw, dict) and raw.get("unit") == "decay_length_um":
        try:
            return angle_from_decay_length(float(raw["value"]) * 1e-6, n, atom)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return parse_quantity(raw, "angle", "angle")


def _parse_systematics(d: dict, atom: AtomSpecies) -> Systematics:
    if not isinstance(d, dict):
        raise ConfigError("systematics must be an object")
    dims = {"prism_tilt": "angle", "prism_tilt_err": "angle", "mot_horizontal_offset": "length",
            "launch_velocity": "velocity", "launch_velocity_err": "velocity",
            "roughness_offset_recoils": "dimensionless"}
    unknown = set(d) - set(dims)
    if unknown:
        raise ConfigError(f"unknown systematics keys: {sorted(unknown)}")
    return Systematics(**{k: parse_quantity(v, dims[k], k) for k, v in d.items()})


def _parse_ccd(d: dict) -> CcdSpec:
    if not isinstance(d, dict):
        raise ConfigError("ccd must be an object")
    kw = {}
    for k, v in d.items():
        if k in ("rows", "cols", "shots_per_frame"):
            kw[k] = _int(v, k)
        elif k == "pixel_pitch":
            kw[k] = parse_quantity(v, "length", k)
        elif k == "exposure":
            kw[k] = parse_quantity(v, "time", k)
        elif k in ("origin_row", "origin_col", "psf_sigma_px", "photon_yield"):
            kw[k] = float(v)
        else:
            raise ConfigError(f"unknown ccd key {k!r}")
    try:
        return CcdSpec(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_corrections(d: dict) -> Corrections:
    if not isinstance(d, dict):
        raise ConfigError("corrections must be an object")
    unknown = set(d) - {"vdw", "hyperfine", "obe", "roughness_offset", "c3"}
    if unknown:
        raise ConfigError(f"unknown corrections keys: {sorted(unknown)}")
    kw = {k: bool(d[k]) for k in ("vdw", "hyperfine", "obe") if k in d}
    if "roughness_offset" in d:
        kw["roughness_offset"] = float(d["roughness_offset"])
    if d.get("c3") is not None:
        kw["c3"] = float(d["c3"])
    return Corrections(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentConfig.from_dict(data)


def default_config() -> ExperimentConfig:
    """Published settings: n = 1.51, xi = 0.67 um, 19 mW, w = 335 um, delta = 44 Gamma."""
    return ExperimentConfig()
