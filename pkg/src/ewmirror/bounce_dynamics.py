"""Single-atom bounces and seeded Monte Carlo clouds.

Coordinates: x along the propagating EW component, y along the camera axis,
z the height above the prism surface. The EW spot is centered at x = y = 0.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.optimize import brentq

from . import rng
from .constants import G_ACCEL, RB87_D2, RB87_D2_HYPERFINE, AtomSpecies, HyperfineModel, hbar, k_B
from .errors import IntegrationError, NoBounceError
from .ew_optics import EwField, EwGeometry, make_field
from .mirror_potential import (
    DEFAULT_Z_MIN,
    MirrorPotential,
    barrier_maximum,
    build_potential,
    c3_dielectric,
    effective_mirror_radius,
)
from .photon_budget import (
    hyperfine_factor,
    nscat_analytic,
    nscat_path_integral,
    saturation_ratio,
)


def fall_time(height: float) -> float:
    if height < 0:
        raise ValueError("height must be non-negative")
    return math.sqrt(2 * height / G_ACCEL)


@dataclass(frozen=True)
class IncidentMomentum:
    momentum: float
    in_k0_recoils: float
    in_kx_recoils: float | None


def incident_momentum(species: AtomSpecies, height: float, kx: float | None = None) -> IncidentMomentum:
    """p_i = M sqrt(2 g h), also in units of hbar k0 and (optionally) hbar kx."""
    if not height > 0:
        raise ValueError("height must be positive")
    p = species.mass * math.sqrt(2 * G_ACCEL * height)
    return IncidentMomentum(p, p / (hbar * species.k0), None if kx is None else p / (hbar * kx))


@dataclass
class AtomState:
    x: float
    z: float
    v_x: float
    v_z: float
    scattered: float = 0.0
    y: float = 0.0
    v_y: float = 0.0


@dataclass(frozen=True)
class Systematics:
    """Alignment errors. ``*_err`` are 1-sigma uncertainties used when the
    corresponding correction is applied to measured data."""

    prism_tilt: float = 0.0
    prism_tilt_err: float = 0.0
    mot_horizontal_offset: float = 0.0
    launch_velocity: float = 0.0
    launch_velocity_err: float = 0.0
    roughness_offset_recoils: float = 0.0


# -- single bounce

_Y1 = 1.0 / (2.0 - 2.0 ** (1 / 3))
_Y0 = 1.0 - 2.0 * _Y1


@dataclass
class BounceTrajectory:
    t: np.ndarray
    z: np.ndarray
    v_z: np.ndarray
    x: np.ndarray
    v_x: np.ndarray
    scattered: np.ndarray
    dipole: np.ndarray
    max_energy_error: float

    @property
    def final(self) -> AtomState:
        return AtomState(float(self.x[-1]), float(self.z[-1]), float(self.v_x[-1]),
                         float(self.v_z[-1]), float(self.scattered[-1]))

    def turning_time(self) -> float:
        """Time where v_z crosses zero (linear interpolation)."""
        k = int(np.argmax(self.v_z >= 0))
        v0, v1 = self.v_z[k - 1], self.v_z[k]
        return float(self.t[k - 1] + (self.t[k] - self.t[k - 1]) * (-v0) / (v1 - v0))


def integrate_bounce(state: AtomState, pot: MirrorPotential, species: AtomSpecies,
                     field: EwField, dt_max: float = 1e-6, *, scattering: bool = True,
                     energy_tol: float = 1e-10, dz_fraction: float = 1 / 50,
                     max_steps: int = 2_000_000) -> BounceTrajectory:
    """Integrate one passage through the mirror potential.

    Starts from ``state`` (above the EW region, moving down) and stops when
    the atom is back at the starting height moving up. The integrator is a
    fourth-order Yoshida composition of velocity-Verlet steps; the step is
    limited to ``dz_fraction`` decay lengths of travel and halved whenever the
    energy changes by more than ``energy_tol`` (relative) in one step. The
    last step is shortened to end exactly at the start height.
    With ``scattering`` the mean radiation-pressure force adds
    dN hbar k_x / M to v_x, with dN = Gamma' dt.
    """
    if state.v_z >= 0:
        raise ValueError("atom must be moving towards the surface")
    m = species.mass
    kappa, u0, c3, mg = pot.kappa, pot.u0, pot.c3, pot.mg
    vdw, grav = pot.include_vdw, pot.include_gravity
    z_floor = pot.z_min if vdw else 0.0
    rate_per_u = species.linewidth / (hbar * field.detuning)
    kick = hbar * field.kx / m
    xi = 1.0 / kappa

    def accel(z):
        a = 2 * kappa * u0 * math.exp(-2 * kappa * z)
        if vdw:
            a -= 3 * c3 / z**4
        if grav:
            a -= mg
        return a / m

    def potential(z):
        u = u0 * math.exp(-2 * kappa * z)
        if vdw:
            u -= c3 / z**3
        if grav:
            u += mg * z
        return u

    def vv(z, v, h):
        v += 0.5 * h * accel(z)
        z += h * v
        if z <= z_floor:
            raise IntegrationError(f"trajectory reached z={z:.4g} m below the surface cutoff")
        v += 0.5 * h * accel(z)
        return z, v

    def step(z, v, h):
        z, v = vv(z, v, _Y1 * h)
        z, v = vv(z, v, _Y0 * h)
        return vv(z, v, _Y1 * h)

    z, v = state.z, state.v_z
    z_start = state.z
    e0 = 0.5 * m * v * v + potential(z)
    e_scale = abs(e0)
    t, x, vx, n = 0.0, state.x, state.v_x, state.scattered
    ts, zs, vs, xs, vxs, ns = [t], [z], [v], [x], [vx], [n]
    e_prev = e0
    max_err = 0.0
    h = dt_max
    h_floor = 1e-12 * xi / abs(v)
    steps = 0
    while True:
        a = abs(accel(z))
        h_dz = dz_fraction * xi / max(abs(v), 1e-300)
        if a > 0:
            h_dz = min(h_dz, math.sqrt(2 * dz_fraction * xi / a))
        h = min(dt_max, h_dz, 2 * h)
        while True:
            try:
                z1, v1 = step(z, v, h)
                e1 = 0.5 * m * v1 * v1 + potential(z1)
                err = abs(e1 - e_prev) / e_scale
            except (IntegrationError, OverflowError):
                err = math.inf
            if err <= energy_tol:
                break
            h *= 0.5
            if h < h_floor:
                raise IntegrationError(f"step size collapsed at z={z:.4g} m")
        done = v1 > 0 and z1 >= z_start
        if done and z1 > z_start:
            # shorten the last step to end exactly at the start height
            h = brentq(lambda hh: step(z, v, hh)[0] - z_start, 0.0, h,
                       xtol=1e-15 * h, rtol=4 * np.finfo(float).eps)
            z1, v1 = step(z, v, h)
            e1 = 0.5 * m * v1 * v1 + potential(z1)
        e_prev = e1
        max_err = max(max_err, abs(e1 - e0) / e_scale)
        if scattering:
            # Simpson over the step using the midpoint of the straight segment
            r0 = u0 * math.exp(-2 * kappa * z)
            r1 = u0 * math.exp(-2 * kappa * z1)
            zm = 0.5 * (z + z1) - 0.125 * h * (v1 - v)
            rm = u0 * math.exp(-2 * kappa * zm)
            dn = rate_per_u * h * (r0 + 4 * rm + r1) / 6
            n += dn
            vx_mid = vx + 0.5 * dn * kick
            vx += dn * kick
            x += h * vx_mid
        else:
            x += h * vx
        z, v = z1, v1
        t += h
        ts.append(t)
        zs.append(z)
        vs.append(v)
        xs.append(x)
        vxs.append(vx)
        ns.append(n)
        steps += 1
        if done:
            break
        if steps > max_steps:
            raise IntegrationError(f"no return after {max_steps} steps (z={z:.4g} m)")
    zs = np.array(zs)
    return BounceTrajectory(
        t=np.array(ts), z=zs, v_z=np.array(vs), x=np.array(xs), v_x=np.array(vxs),
        scattered=np.array(ns), dipole=u0 * np.exp(-2 * kappa * zs), max_energy_error=max_err,
    )


def start_state_above(pot: MirrorPotential, species: AtomSpecies, p_incident: float,
                      height_in_xi: float = 20.0, x: float = 0.0, v_x: float = 0.0) -> AtomState:
    """State at ``height_in_xi`` decay lengths for an atom that would reach
    the bare surface with momentum ``p_incident``."""
    z0 = height_in_xi * pot.xi
    m = species.mass
    optical = float(pot(z0)) - (pot.mg * z0 if pot.include_gravity else 0.0)
    v2 = (p_incident / m) ** 2 - 2 * optical / m
    if pot.include_gravity:
        v2 -= 2 * G_ACCEL * z0
    if v2 <= 0:
        raise NoBounceError("start height inside the classically forbidden region")
    return AtomState(x=x, z=z0, v_x=v_x, v_z=-math.sqrt(v2))


def nscat_time_domain(species: AtomSpecies, field: EwField, pot: MirrorPotential,
                      p_incident: float, **kwargs) -> float:
    """Photon number from integrating Gamma'(z(t)) along the ODE trajectory."""
    start = start_state_above(pot, species, p_incident)
    traj = integrate_bounce(start, pot, species, field, **kwargs)
    return float(traj.scattered[-1])


# -- recoils and systematics

def recoil_velocity_x(field: EwField, species: AtomSpecies) -> float:
    """hbar k_x / M."""
    return hbar * field.kx / species.mass


def apply_recoil_statistics(state: AtomState, n_scat: float, field: EwField,
                            species: AtomSpecies, seed: int = 0, atom_id: int = 0,
                            stochastic: bool = True) -> AtomState:
    """Add absorption recoils along x and spontaneous-emission recoils.

    Stochastic: N ~ Poisson(n_scat) absorptions of hbar k_x each plus N
    isotropic emission recoils of hbar k0. Deterministic: mean absorption
    recoil only (emission averages to zero).
    """
    if n_scat < 0:
        raise ValueError("n_scat must be non-negative")
    if n_scat == 0:
        return replace(state)
    v_rec_x = recoil_velocity_x(field, species)
    if not stochastic:
        return replace(state, v_x=state.v_x + n_scat * v_rec_x,
                       scattered=state.scattered + n_scat)
    dvx, dvy, dvz, counts = sample_recoils(np.array([n_scat]), v_rec_x,
                                           species.recoil_velocity, seed, np.array([atom_id]))
    return replace(state, v_x=state.v_x + dvx[0], v_y=state.v_y + dvy[0],
                   v_z=state.v_z + dvz[0], scattered=state.scattered + counts[0])


def sample_recoils(n_mean, v_rec_x: float, v_rec: float, seed: int, ids):
    """Vectorized recoil sampling; returns (dvx, dvy, dvz, counts)."""
    counts = rng.counter_poisson(seed, ids, rng.PHOTON_COUNT, n_mean)
    emission = rng.isotropic_sum(seed, ids, rng.EMISSION, counts) * v_rec
    dvx = counts * v_rec_x + emission[:, 0]
    return dvx, emission[:, 1], emission[:, 2], counts


def reflect_tilted(vx_in, vz_in, tilt: float):
    """Specular reflection off a surface whose normal is tilted by ``tilt``
    from vertical (towards +x)."""
    nx, nz = math.sin(tilt), math.cos(tilt)
    dot = vx_in * nx + vz_in * nz
    return vx_in - 2 * dot * nx, vz_in - 2 * dot * nz


def apply_systematics(state_out: AtomState, sys: Systematics, v_incident: float) -> AtomState:
    """Turn a specular (untilted) outgoing state into the tilted-prism one.

    The velocity change is 2 v_i sin(phi) cos(phi) along x; the speed is
    preserved. Launch velocity and MOT offset act on the initial state and
    are applied when a cloud is sampled.
    """
    phi = sys.prism_tilt
    if phi == 0:
        return replace(state_out)
    v = abs(v_incident)
    return replace(state_out,
                   v_x=state_out.v_x + 2 * v * math.sin(phi) * math.cos(phi),
                   v_z=state_out.v_z - v * (1 - math.cos(2 * phi)))


# -- clouds

@dataclass(frozen=True)
class CloudConfig:
    geometry: EwGeometry
    detuning: float
    species: AtomSpecies = RB87_D2
    fall_height: float = 6.6e-3
    temperature: float = 10e-6
    n_atoms: int = 100_000
    mot_sigma: float = 0.3e-3
    systematics: Systematics = dc_field(default_factory=Systematics)
    c3: float | None = None
    include_vdw: bool = True
    hyperfine: bool = True
    obe: bool = True
    scattering: str = "mean"  # "mean", "stochastic" or "off"
    soft_mirror_edge: bool = True
    hyperfine_model: HyperfineModel = RB87_D2_HYPERFINE
    z_min: float = DEFAULT_Z_MIN
    antithetic: bool = False

    def __post_init__(self):
        if self.scattering not in ("mean", "stochastic", "off"):
            raise ValueError(f"unknown scattering mode {self.scattering!r}")
        if self.n_atoms < 0:
            raise ValueError("n_atoms must be non-negative")

    def resolved_c3(self) -> float:
        if self.c3 is not None:
            return self.c3
        return c3_dielectric(self.geometry.refractive_index, self.species)


@dataclass
class BounceModel:
    """Lookup tables shared by every atom of a cloud."""

    field: EwField
    c3: float
    e_nominal: float
    p_nominal: float
    log_u: np.ndarray
    barrier_over_u: np.ndarray
    vdw_log_ratio: np.ndarray
    vdw_ratio: np.ndarray
    correction: float
    r_eff: float

    def barrier_height(self, u0_local):
        lu = np.log(np.maximum(u0_local, 1e-300))
        return u0_local * np.interp(lu, self.log_u, self.barrier_over_u)

    def vdw_factor(self, u0_local, energy):
        x = np.log(u0_local / energy)
        return np.interp(x, self.vdw_log_ratio, self.vdw_ratio)


def build_bounce_model(cfg: CloudConfig) -> BounceModel:
    species = cfg.species
    field = make_field(cfg.geometry, species, cfg.detuning)
    c3 = cfg.resolved_c3() if cfg.include_vdw else 0.0
    p_nom = incident_momentum(species, cfg.fall_height).momentum
    e_nom = p_nom**2 / (2 * species.mass)

    def pot_for(u0):
        return MirrorPotential(u0=u0, kappa=field.decay_constant, c3=c3, mg=0.0,
                               z_min=cfg.z_min, include_gravity=False,
                               include_vdw=cfg.include_vdw)

    log_u = np.linspace(math.log(e_nom) - 3, math.log(max(field.u0, e_nom)) + 0.5, 160)
    b_over_u = np.array([barrier_maximum(pot_for(math.exp(lu)))[0] / math.exp(lu)
                         for lu in log_u])

    base = build_potential(field, species, c3=c3, include_vdw=cfg.include_vdw,
                           include_gravity=False, z_min=cfg.z_min)
    bounces_center = barrier_maximum(base)[0] > e_nom
    if cfg.include_vdw and bounces_center:
        # local-barrier / energy grid from just above threshold to the center value
        def height(u):
            return barrier_maximum(pot_for(u))[0] - e_nom

        u_th = brentq(height, e_nom, field.u0, xtol=1e-14 * e_nom)
        xs = np.log(u_th / e_nom) + np.linspace(0, 1, 20) ** 2 * math.log(field.u0 / u_th)
        xs[0] = math.log(u_th / e_nom) + 1e-6
        ratios = []
        n_ana = nscat_analytic(species, field, p_nom)
        for x in xs:
            u = e_nom * math.exp(x)
            ratios.append(nscat_path_integral(species, field, pot_for(u), p_nom) / n_ana)
        vdw_x, vdw_r = xs, np.array(ratios)
    else:
        vdw_x, vdw_r = np.array([0.0, 1.0]), np.array([1.0, 1.0])

    corr = 1.0
    if cfg.scattering != "off" and bounces_center:
        if cfg.obe:
            corr *= saturation_ratio(species, field, p_nom).ratio
        if cfg.hyperfine:
            corr *= hyperfine_factor(cfg.hyperfine_model, field.detuning)
    r_eff = effective_mirror_radius(field, species, e_nom, c3=c3, include_vdw=cfg.include_vdw,
                                    z_min=cfg.z_min)
    return BounceModel(field, c3, e_nom, p_nom, log_u, b_over_u, vdw_x, vdw_r, corr, r_eff)


@dataclass
class Snapshot:
    t: float
    atom_id: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray
    v_z: np.ndarray
    scattered: np.ndarray
    bounced: np.ndarray
    alive: np.ndarray

    def visible(self) -> "Snapshot":
        m = self.alive
        return Snapshot(self.t, *(getattr(self, f)[m] for f in
                                  ("atom_id", "x", "y", "z", "v_x", "v_y", "v_z",
                                   "scattered", "bounced", "alive")))

    def atoms(self) -> list[AtomState]:
        return [AtomState(float(self.x[i]), float(self.z[i]), float(self.v_x[i]),
                          float(self.v_z[i]), float(self.scattered[i]), float(self.y[i]),
                          float(self.v_y[i])) for i in range(self.atom_id.size)]


@dataclass
class CloudEnsemble:
    """Sampled cloud with its bounce outcome; positions at any time follow
    from closed-form kinematics between release and the (instantaneous)
    bounce, and after it."""

    config: CloudConfig
    seed: int
    atom_id: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    z0: np.ndarray
    vx0: np.ndarray
    vy0: np.ndarray
    vz0: np.ndarray
    t_hit: np.ndarray
    bounced: np.ndarray
    vx_out: np.ndarray
    vy_out: np.ndarray
    vz_out: np.ndarray
    scattered: np.ndarray
    r_eff: float = 0.0

    @property
    def temperature(self) -> float:
        return self.config.temperature

    @property
    def release_height(self) -> float:
        return self.config.fall_height

    @property
    def mot_sigma(self) -> float:
        return self.config.mot_sigma

    @property
    def mot_horizontal_offset(self) -> float:
        return self.config.systematics.mot_horizontal_offset

    @property
    def bounce_fraction(self) -> float:
        return float(self.bounced.mean()) if self.bounced.size else 0.0

    @property
    def no_bounce(self) -> bool:
        return not bool(self.bounced.any())

    def snapshot(self, t: float) -> Snapshot:
        g = G_ACCEL
        before = t < self.t_hit
        tb = np.where(before, t, self.t_hit)
        x = self.x0 + self.vx0 * tb
        y = self.y0 + self.vy0 * tb
        z = self.z0 + self.vz0 * tb - 0.5 * g * tb**2
        vx = self.vx0.copy()
        vy = self.vy0.copy()
        vz = self.vz0 - g * tb
        dt = np.where(before, 0.0, t - self.t_hit)
        after = ~before & self.bounced
        x = np.where(after, x + self.vx_out * dt, x)
        y = np.where(after, y + self.vy_out * dt, y)
        z = np.where(after, self.vz_out * dt - 0.5 * g * dt**2, z)
        vx = np.where(after, self.vx_out, vx)
        vy = np.where(after, self.vy_out, vy)
        vz = np.where(after, self.vz_out - g * dt, vz)
        alive = before | (after & (z >= 0))
        scattered = np.where(after, self.scattered, 0.0)
        return Snapshot(t, self.atom_id, x, y, z, vx, vy, vz, scattered,
                        self.bounced & ~before, alive)

    def mean_incident_speed(self) -> float:
        v = np.sqrt(self.vz0**2 + 2 * G_ACCEL * self.z0)
        return float(v[self.bounced].mean()) if self.bounced.any() else float(v.mean())

    @classmethod
    def concat(cls, parts: list["CloudEnsemble"]) -> "CloudEnsemble":
        arrays = {}
        for name in ("atom_id", "x0", "y0", "z0", "vx0", "vy0", "vz0", "t_hit", "bounced",
                     "vx_out", "vy_out", "vz_out", "scattered"):
            arrays[name] = np.concatenate([getattr(p, name) for p in parts])
        return cls(parts[0].config, parts[0].seed, r_eff=parts[0].r_eff, **arrays)


def _simulate_ids(cfg: CloudConfig, seed: int, ids: np.ndarray, model: BounceModel) -> CloudEnsemble:
    species = cfg.species
    sysm = cfg.systematics
    sigma_v = math.sqrt(k_B * cfg.temperature / species.mass)
    draw_ids = ids // 2 if cfg.antithetic else ids
    pos = rng.counter_normal(seed, draw_ids, rng.INITIAL_POSITION, 3) * cfg.mot_sigma
    vel = rng.counter_normal(seed, draw_ids, rng.INITIAL_VELOCITY, 3) * sigma_v
    if cfg.antithetic:
        # odd ids mirror their even partner horizontally (variance reduction)
        sign = np.where(ids % 2 == 1, -1.0, 1.0)[:, None]
        pos[:, :2] *= sign
        vel[:, :2] *= sign
    # MOT offset: cloud center relative to the EW spot
    x0 = pos[:, 0] + sysm.mot_horizontal_offset
    y0 = pos[:, 1]
    z0 = cfg.fall_height + pos[:, 2]
    vx0 = vel[:, 0] + sysm.launch_velocity
    vy0 = vel[:, 1]
    vz0 = vel[:, 2]

    g = G_ACCEL
    v_in = np.sqrt(vz0**2 + 2 * g * np.maximum(z0, 0.0))
    t_hit = (vz0 + v_in) / g
    r_hit = np.hypot(x0 + vx0 * t_hit, y0 + vy0 * t_hit)
    field = model.field
    e_atom = 0.5 * species.mass * v_in**2
    u_local = field.u0 * np.exp(-2 * r_hit**2 / field.waist**2)
    if cfg.soft_mirror_edge:
        bounced = model.barrier_height(u_local) > e_atom
    else:
        bounced = r_hit < model.r_eff

    n_mean = np.zeros(ids.size)
    if cfg.scattering != "off" and bounced.any():
        p_atom = species.mass * v_in[bounced]
        n_ana = species.linewidth / field.detuning * p_atom / (hbar * field.decay_constant)
        n_mean[bounced] = n_ana * model.vdw_factor(u_local[bounced], e_atom[bounced]) \
            * model.correction

    vx_out, vz_out = reflect_tilted(vx0, -v_in, sysm.prism_tilt)
    vy_out = vy0.copy()
    v_rec_x = hbar * field.kx / species.mass
    if cfg.scattering == "mean":
        vx_out = vx_out + n_mean * v_rec_x
        scattered = n_mean
    elif cfg.scattering == "stochastic":
        dvx, dvy, dvz, counts = sample_recoils(n_mean, v_rec_x, species.recoil_velocity, seed, ids)
        vx_out = vx_out + dvx
        vy_out = vy_out + dvy
        vz_out = vz_out + dvz
        scattered = counts.astype(float)
    else:
        scattered = n_mean
    scattered = np.where(bounced, scattered, 0.0)
    return CloudEnsemble(cfg, seed, ids, x0, y0, z0, vx0, vy0, vz0, t_hit, bounced,
                         vx_out, vy_out, vz_out, scattered, r_eff=model.r_eff)


def simulate_cloud(cfg: CloudConfig, seed: int, *, atom_ids=None, threads: int = 1,
                   model: BounceModel | None = None) -> CloudEnsemble:
    """Sample, drop and bounce a cloud.

    Every atom's randomness is keyed by (seed, atom id), so any partition of
    ``atom_ids`` over ``threads`` workers yields the same ensemble.
    """
    if model is None:
        model = build_bounce_model(cfg)
    ids = np.arange(cfg.n_atoms, dtype=np.int64) if atom_ids is None \
        else np.asarray(atom_ids, dtype=np.int64)
    if threads <= 1 or ids.size < 2 * threads:
        return _simulate_ids(cfg, seed, ids, model)
    chunks = np.array_split(ids, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: _simulate_ids(cfg, seed, c, model), chunks))
    return CloudEnsemble.concat(parts)


def cloud_sigma_at(temperature: float, mass: float, mot_sigma: float, t: float) -> float:
    """Horizontal rms size of a ballistically expanding cloud."""
    return math.sqrt(mot_sigma**2 + k_B * temperature / mass * t**2)
