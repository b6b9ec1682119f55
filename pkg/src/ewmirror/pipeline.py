"""End-to-end runs built from the physics modules: photon budgets, sweeps,
threshold reports and the simulated measurement pipeline."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import rng
from .bounce_dynamics import (
    CloudEnsemble,
    build_bounce_model,
    cloud_sigma_at,
    fall_time,
    incident_momentum,
    simulate_cloud,
)
from .config import ExperimentConfig
from .constants import G_ACCEL, hbar, k_B
from .errors import FitError, NoBounceError, NoSignalError, ThresholdNotFoundError
from .ew_optics import detuning_to_gamma, make_field
from .mirror_potential import (
    barrier_maximum,
    bounce_fraction,
    build_potential,
    c3_dielectric,
    decay_length_threshold,
    detuning_threshold,
    effective_mirror_radius,
)
from .photon_budget import ScatterBudget, corrected_prediction
from .virtual_diagnostics import (
    Centroid,
    FrameStack,
    TrajectoryFit,
    centroid,
    fit_trajectory,
    render_frame,
    systematics_correction,
)

BUDGET_COLUMNS = ["delta_over_Gamma", "xi_um", "n_twolevel", "n_pathintegral", "n_obe",
                  "hyperfine_factor", "n_corrected", "bounces"]


def resolved_c3(cfg: ExperimentConfig) -> float:
    c = cfg.corrections.c3
    return c if c is not None else c3_dielectric(cfg.geometry.refractive_index, cfg.atom)


def budget(cfg: ExperimentConfig) -> ScatterBudget:
    """Corrected photon budget for one bounce at the beam center.

    Raises :class:`NoBounceError` (with the detuning threshold as a hint)
    when the barrier is below the incident energy.
    """
    atom = cfg.atom
    field = make_field(cfg.ew_geometry(), atom, cfg.detuning)
    corr = cfg.corrections
    pot = build_potential(field, atom, c3=resolved_c3(cfg), include_vdw=corr.vdw,
                          include_gravity=False)
    p = incident_momentum(atom, cfg.fall_height).momentum
    e = p**2 / (2 * atom.mass)
    if cfg.detuning < 0 or barrier_maximum(pot)[0] <= e:
        hint = ""
        try:
            d_th = detuning_threshold(cfg.ew_geometry(), atom, None, cfg.fall_height,
                                      c3=resolved_c3(cfg), include_vdw=corr.vdw)
            hint = f"; detuning threshold is {d_th / (2 * math.pi * 1e9):.3g} GHz"
        except (ThresholdNotFoundError, ValueError):
            pass
        raise NoBounceError(f"barrier below incident energy at "
                            f"{detuning_to_gamma(cfg.detuning, atom):.4g} Gamma{hint}")
    return corrected_prediction(atom, field, pot, p, obe=corr.obe, hyperfine=corr.hyperfine,
                                roughness_offset=corr.roughness_offset)


def budget_row(cfg: ExperimentConfig) -> dict:
    atom = cfg.atom
    xi = 1.0 / make_field(cfg.ew_geometry(), atom, cfg.detuning).decay_constant
    row = {"delta_over_Gamma": detuning_to_gamma(cfg.detuning, atom), "xi_um": xi * 1e6}
    try:
        row.update(budget(cfg).as_row())
        row["bounces"] = True
    except NoBounceError:
        row.update({k: float("nan") for k in BUDGET_COLUMNS[2:-1]})
        row["bounces"] = False
    return row


def sweep(cfg: ExperimentConfig, axis: str, start: float, stop: float, points: int,
          threads: int = 1) -> list[dict]:
    """Budget rows on a grid.

    ``axis='detuning'``: start/stop in units of Gamma.
    ``axis='angle'``: start/stop in mrad above the critical angle.
    Points past threshold are flagged (bounces = 0) and the sweep continues.
    """
    if points < 1:
        raise ValueError("points must be >= 1")
    grid = np.linspace(start, stop, points) if points > 1 else np.array([start])
    if axis == "detuning":
        if np.any(grid <= 0):
            raise ValueError("detuning grid must be positive")
        cfgs = [cfg.with_detuning(float(v) * cfg.atom.linewidth) for v in grid]
    elif axis == "angle":
        if np.any(grid <= 0):
            raise ValueError("angle grid must lie above the critical angle")
        theta_c = cfg.ew_geometry().critical_angle
        cfgs = [cfg.with_angle(theta_c + float(v) * 1e-3) for v in grid]
    else:
        raise ValueError(f"axis must be 'detuning' or 'angle', not {axis!r}")
    if threads <= 1:
        return [budget_row(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(budget_row, cfgs))


THRESHOLD_COLUMNS = ["variant", "c3_scale", "delta_th_GHz", "xi_th_nm", "theta_th_mrad_above_critical",
                     "r_eff_m", "fraction"]


def threshold_row(cfg: ExperimentConfig, c3_scale: float = 1.0, include_vdw: bool | None = None,
                  variant: str = "nominal") -> dict:
    atom = cfg.atom
    geom = cfg.ew_geometry()
    vdw = cfg.corrections.vdw if include_vdw is None else include_vdw
    c3 = resolved_c3(cfg) * c3_scale
    row: dict = {"variant": variant, "c3_scale": c3_scale}
    try:
        d_th = detuning_threshold(geom, atom, None, cfg.fall_height, c3=c3, include_vdw=vdw)
        row["delta_th_GHz"] = d_th / (2 * math.pi * 1e9)
    except ThresholdNotFoundError:
        row["delta_th_GHz"] = float("nan")
    try:
        x_th = decay_length_threshold(atom, geom.power, cfg.detuning, cfg.fall_height,
                                      n=geom.refractive_index, waist=geom.waist,
                                      polarization=geom.polarization, c3=c3, include_vdw=vdw)
        row["xi_th_nm"] = x_th.decay_length * 1e9
        row["theta_th_mrad_above_critical"] = x_th.angle_above_critical * 1e3
    except ThresholdNotFoundError:
        row["xi_th_nm"] = row["theta_th_mrad_above_critical"] = float("nan")
    field = make_field(geom, atom, cfg.detuning)
    e = atom.mass * G_ACCEL * cfg.fall_height
    r_eff = effective_mirror_radius(field, atom, e, c3=c3, include_vdw=vdw)
    sigma = cloud_sigma_at(cfg.temperature, atom.mass, cfg.mot_sigma, fall_time(cfg.fall_height))
    row["r_eff_m"] = r_eff
    row["fraction"] = bounce_fraction(sigma, cfg.systematics.mot_horizontal_offset, r_eff)
    return row


def threshold_report(cfg: ExperimentConfig, sensitivity: bool = True) -> list[dict]:
    """Nominal thresholds, plus C3 and van der Waals sensitivity rows."""
    rows = [threshold_row(cfg)]
    if sensitivity:
        for scale in (0.5, 2.0):
            rows.append(threshold_row(cfg, c3_scale=scale, variant=f"c3_x{scale:g}"))
        rows.append(threshold_row(cfg, include_vdw=False, variant="no_vdw"))
    return rows


# -- measurement pipeline

@dataclass
class FrameRecord:
    t: float
    n_visible: int
    centroid: Centroid | None
    used: bool

    def as_row(self) -> dict:
        c = self.centroid
        nan = float("nan")
        return {"t_ms": self.t * 1e3, "x_mm": c.x * 1e3 if c else nan,
                "z_mm": c.z * 1e3 if c else nan, "x_err_mm": c.err * 1e3 if c else nan,
                "n_atoms": self.n_visible, "used": self.used}


@dataclass
class PipelineResult:
    frames: FrameStack
    records: list[FrameRecord]
    fit: TrajectoryFit | None
    corrected: TrajectoryFit | None
    truth: ScatterBudget | None
    ensemble_recoils: float
    bounce_fraction: float
    recoil_velocity: float
    v_incident: float
    no_signal: bool = False
    messages: list[str] = dc_field(default_factory=list)

    @property
    def measured_recoils(self) -> float:
        f = self.corrected or self.fit
        return f.recoils if f else float("nan")

    def summary_row(self) -> dict:
        f = self.corrected or self.fit
        nan = float("nan")
        return {
            "vx_pre": f.pre_bounce.v_x if f else nan,
            "vx_post": f.post_bounce.v_x if f else nan,
            "delta_vx": f.delta_vx if f else nan,
            "recoils": f.recoils if f else nan,
            "recoils_err": f.recoils_err if f else nan,
            "recoils_uncorrected": self.fit.recoils if self.fit else nan,
            "intercept_mismatch_mm": f.intercept_mismatch * 1e3 if f else nan,
            "truth_n_corrected": self.truth.n_corrected if self.truth else nan,
            "truth_ensemble": self.ensemble_recoils,
            "bounce_fraction": self.bounce_fraction,
            "no_signal": self.no_signal,
        }


def shot_seed(seed: int, frame_index: int) -> int:
    return rng.derived_seed(seed, frame_index)


def impact_time_spread(cfg: ExperimentConfig) -> float:
    """rms spread of the surface arrival time from the cloud size and temperature."""
    v_in = math.sqrt(2 * G_ACCEL * cfg.fall_height)
    sigma_v = math.sqrt(k_B * cfg.temperature / cfg.atom.mass)
    return math.hypot(cfg.mot_sigma / v_in, sigma_v / G_ACCEL)


def run_pipeline(cfg: ExperimentConfig, times=None, *, threads: int = 1, noise: bool = True,
                 independent_shots: bool = True, correct_systematics: bool = True,
                 with_truth: bool = True, guard_sigmas: float = 3.0) -> PipelineResult:
    """simulate -> render -> centroid -> fit -> systematics correction.

    With ``independent_shots`` every frame images a fresh cloud (as in an
    experiment where each image is a separate drop); otherwise all frames
    show the same ensemble. Frames within ``guard_sigmas`` arrival-time
    spreads of the mean bounce time show a cloud that straddles the surface
    (part bounced, part still falling) and are left out of the fit, as are
    frames clipped by the field of view.
    """
    times = tuple(cfg.snapshot_times if times is None else times)
    if len(times) < 4:
        raise ValueError("need at least four snapshot times")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be strictly increasing")
    atom = cfg.atom
    cloud_cfg = cfg.cloud_config()
    model = build_bounce_model(cloud_cfg)
    v_rec = hbar * model.field.kx / atom.mass
    t_b = fall_time(cfg.fall_height)
    v_in = G_ACCEL * t_b
    guard = guard_sigmas * impact_time_spread(cfg)

    frames = FrameStack()
    records: list[FrameRecord] = []
    shared: CloudEnsemble | None = None
    if not independent_shots:
        shared = simulate_cloud(cloud_cfg, cfg.seed, threads=threads, model=model)
    dv_sum, n_bounced, n_total = 0.0, 0, 0
    for i, t in enumerate(times):
        if shared is None:
            ens = simulate_cloud(cloud_cfg, shot_seed(cfg.seed, i), threads=threads, model=model)
        else:
            ens = shared
        if shared is None or i == 0:
            b = ens.bounced
            dv_sum += float((ens.vx_out[b] - ens.vx0[b]).sum())
            n_bounced += int(b.sum())
            n_total += b.size
        snap = ens.snapshot(t)
        img = render_frame(snap, cfg.ccd, noise=noise, seed=cfg.seed, frame_index=i)
        frames.append(t, img)
        try:
            c = centroid(img, cfg.ccd)
        except NoSignalError:
            c = None
        used = c is not None and not c.clipped and abs(t - t_b) >= guard
        records.append(FrameRecord(t, int(snap.alive.sum()), c, used))

    messages = []
    pts = [(r.t, r.centroid.x, r.centroid.err) for r in records if r.used]
    fit = corrected = None
    no_signal = False
    try:
        fit = fit_trajectory(pts, t_b, v_rec)
        corrected = systematics_correction(fit, cfg.systematics, v_in) if correct_systematics else None
    except FitError as exc:
        no_signal = True
        messages.append(f"no fit: {exc}")
    truth = None
    if with_truth:
        try:
            truth = budget(cfg)
        except NoBounceError as exc:
            messages.append(str(exc))
    ens_rec = dv_sum / n_bounced / v_rec if n_bounced else float("nan")
    return PipelineResult(frames, records, fit, corrected, truth, ens_rec,
                          n_bounced / n_total if n_total else 0.0, v_rec, v_in,
                          no_signal=no_signal or n_bounced == 0, messages=messages)
