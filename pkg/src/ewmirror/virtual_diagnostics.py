"""Synthetic fluorescence imaging and trajectory analysis.

Frame coordinates: column index grows with x, row index grows downwards
(decreasing z). Pixel (row, col) covers the square centered on
x = (col - origin_col) * pitch, z = (origin_row - row) * pitch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from . import rng
from .bounce_dynamics import Snapshot, Systematics
from .constants import G_ACCEL
from .errors import CorrectionError, FitError, NoSignalError


@dataclass(frozen=True)
class CcdSpec:
    """Binned camera: 200 x 200 pixels of 51 um (10.2 mm field of view)."""

    rows: int = 200
    cols: int = 200
    pixel_pitch: float = 51e-6
    exposure: float = 0.5e-3
    origin_row: float = 190.0
    origin_col: float = 70.0
    psf_sigma_px: float = 1.0
    photon_yield: float = 200.0
    shots_per_frame: int = 10

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0 or not self.pixel_pitch > 0:
            raise ValueError("CCD dimensions must be positive")
        if self.exposure < 0 or self.photon_yield < 0 or self.shots_per_frame < 1:
            raise ValueError("invalid exposure, photon yield or shot count")

    @property
    def field_of_view(self) -> tuple[float, float]:
        """(width, height) in meters."""
        return self.cols * self.pixel_pitch, self.rows * self.pixel_pitch

    def to_pixel(self, x, z):
        """Physical (x, z) -> fractional (row, col)."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        return self.origin_row - z / self.pixel_pitch, self.origin_col + x / self.pixel_pitch

    def to_physical(self, row, col):
        row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        return (col - self.origin_col) * self.pixel_pitch, (self.origin_row - row) * self.pixel_pitch


@dataclass
class FrameStack:
    times: list[float] = dc_field(default_factory=list)
    images: list[np.ndarray] = dc_field(default_factory=list)

    def append(self, t: float, image: np.ndarray):
        if self.times and not t > self.times[-1]:
            raise ValueError("trigger times must be strictly increasing")
        if np.any(image < 0):
            raise ValueError("negative counts")
        self.times.append(t)
        self.images.append(image)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.images))


# -- rendering

def _deposit(image: np.ndarray, row, col, weight):
    """Cloud-in-cell deposit onto pixel centers; points off the frame are dropped."""
    nr, nc = image.shape
    r0 = np.floor(row).astype(np.int64)
    c0 = np.floor(col).astype(np.int64)
    fr = row - r0
    fc = col - c0
    flat = np.zeros(nr * nc)
    for dr, dc, w in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc),
                      (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        rr, cc = r0 + dr, c0 + dc
        ok = (rr >= 0) & (rr < nr) & (cc >= 0) & (cc < nc)
        flat += np.bincount(rr[ok] * nc + cc[ok], weights=(w * weight)[ok], minlength=nr * nc)
    image += flat.reshape(nr, nc)


def render_frame(snapshot: Snapshot, ccd: CcdSpec, exposure: float | None = None,
                 photon_yield: float | None = None, *, noise: bool = True, seed: int = 0,
                 frame_index: int = 0, max_substep_px: float = 0.25) -> np.ndarray:
    """Fluorescence image of the atoms visible in ``snapshot``.

    The exposure window is centered on the snapshot time; atoms are advanced
    ballistically across it in sub-steps of at most ``max_substep_px`` pixels
    (motion blur). Each atom contributes ``photon_yield`` counts spread by a
    Gaussian point-spread function. With ``noise`` the image is the mean of
    ``ccd.shots_per_frame`` Poisson-noisy shots. Values are clipped to the
    16-bit range but left as floats.
    """
    exposure = ccd.exposure if exposure is None else exposure
    photon_yield = ccd.photon_yield if photon_yield is None else photon_yield
    vis = snapshot.visible()
    image = np.zeros((ccd.rows, ccd.cols))
    if vis.atom_id.size:
        speed = float(np.max(np.hypot(vis.v_x, vis.v_z))) if exposure > 0 else 0.0
        n_sub = max(1, math.ceil(speed * exposure / (max_substep_px * ccd.pixel_pitch)))
        offsets = ((np.arange(n_sub) + 0.5) / n_sub - 0.5) * exposure if exposure > 0 else [0.0]
        w = photon_yield / n_sub
        for dt in offsets:
            x = vis.x + vis.v_x * dt
            z = vis.z + vis.v_z * dt - 0.5 * G_ACCEL * dt * dt
            keep = z >= 0
            row, col = ccd.to_pixel(x[keep], z[keep])
            _deposit(image, row, col, np.full(row.shape, w))
        if ccd.psf_sigma_px > 0:
            image = gaussian_filter(image, ccd.psf_sigma_px, mode="constant", truncate=5.0)
    if noise:
        gen = rng.frame_generator(seed, frame_index)
        shots = ccd.shots_per_frame
        image = gen.poisson(image * shots) / shots
    return np.clip(image, 0.0, 65535.0)


# -- centroids

@dataclass(frozen=True)
class Centroid:
    x: float
    z: float
    err: float
    z_err: float
    stat_err: float
    counts: float
    edge_fraction: float

    @property
    def clipped(self) -> bool:
        """Significant signal at the frame border."""
        return self.edge_fraction > 1e-3


def border_median(image: np.ndarray, width: int = 3) -> float:
    border = np.concatenate([image[:width].ravel(), image[-width:].ravel(),
                             image[width:-width, :width].ravel(), image[width:-width, -width:].ravel()])
    return float(np.median(border))


def centroid(image: np.ndarray, ccd: CcdSpec, region: tuple[int, int, int, int] | None = None,
             *, photon_yield: float | None = None) -> Centroid:
    """Intensity-weighted center of mass after border-median subtraction.

    ``region`` is (row_start, row_stop, col_start, col_stop). The statistical
    error combines count statistics with the finite number of atoms
    (counts / photon_yield); the reported ``err`` is floored at one pixel.
    """
    photon_yield = ccd.photon_yield if photon_yield is None else photon_yield
    img = np.asarray(image, dtype=float) - border_median(image)
    img = np.clip(img, 0.0, None)
    r0, r1, c0, c1 = region if region is not None else (0, img.shape[0], 0, img.shape[1])
    sub = img[r0:r1, c0:c1]
    total = float(sub.sum())
    if not total > 0:
        raise NoSignalError("no counts above background in region")
    rows = np.arange(r0, r1)[:, None]
    cols = np.arange(c0, c1)[None, :]
    rc = float((sub * rows).sum() / total)
    cc = float((sub * cols).sum() / total)
    var_c = float((sub * (cols - cc) ** 2).sum() / total)
    var_r = float((sub * (rows - rc) ** 2).sum() / total)
    n_eff = 1.0 / total
    if photon_yield > 0:
        n_eff += photon_yield / total
    pitch = ccd.pixel_pitch
    stat = math.sqrt(var_c * n_eff) * pitch
    stat_z = math.sqrt(var_r * n_eff) * pitch
    edge = np.zeros_like(sub, dtype=bool)
    edge[:2], edge[-2:], edge[:, :2], edge[:, -2:] = True, True, True, True
    x, z = ccd.to_physical(rc, cc)
    return Centroid(float(x), float(z), max(stat, pitch), max(stat_z, pitch), stat, total,
                    float(sub[edge].sum() / total))


# -- fits

@dataclass(frozen=True)
class LineFit:
    v_x: float
    intercept: float
    residual: float
    v_err: float
    intercept_err: float
    chi2: float
    dof: int

    def at(self, t):
        return self.intercept + self.v_x * np.asarray(t)


@dataclass(frozen=True)
class TrajectoryFit:
    pre_bounce: LineFit
    post_bounce: LineFit
    delta_vx: float
    recoils: float
    recoils_err: float
    bounce_time: float
    recoil_velocity: float
    intercept_mismatch: float
    corrections: tuple[str, ...] = ()
    correction_recoils: float = 0.0


def _line_fit(t, x, err) -> LineFit:
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    w = 1.0 / np.asarray(err, dtype=float) ** 2
    # center times for conditioning
    t_ref = float(np.average(t, weights=w))
    dt = t - t_ref
    s_w, s_tt = w.sum(), (w * dt * dt).sum()
    if not s_tt > 0 or s_tt < 1e-24 * s_w * max(np.max(np.abs(t)), 1e-300) ** 2:
        raise FitError("rank-deficient fit: all times coincide")
    slope = float((w * dt * x).sum() / s_tt)
    mean = float((w * x).sum() / s_w)
    intercept = mean - slope * t_ref
    resid = x - (intercept + slope * t)
    chi2 = float((w * resid**2).sum())
    var_slope = 1.0 / s_tt
    var_int = 1.0 / s_w + t_ref**2 / s_tt
    return LineFit(slope, intercept, float(np.sqrt(np.mean(resid**2))), math.sqrt(var_slope),
                   math.sqrt(var_int), chi2, t.size - 2)


def fit_trajectory(centroids, bounce_time: float, recoil_velocity: float) -> TrajectoryFit:
    """Separate straight-line fits of x(t) before and after the bounce.

    ``centroids`` holds ``(t, x)`` or ``(t, x, err)`` tuples;
    ``recoil_velocity`` is hbar k_x / M.
    """
    pts = [tuple(c) for c in centroids]
    if not pts:
        raise FitError("no centroids")
    t = np.array([p[0] for p in pts], dtype=float)
    x = np.array([p[1] for p in pts], dtype=float)
    err = np.array([p[2] if len(p) > 2 else 1.0 for p in pts], dtype=float)
    if np.any(~(err > 0)):
        raise FitError("centroid errors must be positive")
    pre = t < bounce_time
    post = t > bounce_time
    if pre.sum() < 2 or post.sum() < 2:
        raise FitError(f"need 2 points on each side of the bounce, got {pre.sum()} and {post.sum()}")
    f_pre = _line_fit(t[pre], x[pre], err[pre])
    f_post = _line_fit(t[post], x[post], err[post])
    dv = f_post.v_x - f_pre.v_x
    dv_err = math.hypot(f_pre.v_err, f_post.v_err)
    mismatch = float(f_post.at(bounce_time) - f_pre.at(bounce_time))
    return TrajectoryFit(f_pre, f_post, dv, dv / recoil_velocity, dv_err / recoil_velocity,
                         bounce_time, recoil_velocity, mismatch)


@dataclass(frozen=True)
class SystematicsCorrection:
    tilt_recoils: float
    tilt_err: float
    launch_recoils: float
    launch_err: float


def tilt_recoils(sys: Systematics, v_incident: float, recoil_velocity: float) -> tuple[float, float]:
    """Recoil-equivalent of the prism tilt, 2 v_i sin(phi) cos(phi) / v_rec, and its error."""
    v = abs(v_incident)
    phi = sys.prism_tilt
    value = v * math.sin(2 * phi) / recoil_velocity
    err = 2 * v * abs(math.cos(2 * phi)) * sys.prism_tilt_err / recoil_velocity
    return value, err


def systematics_terms(sys: Systematics, v_incident: float, recoil_velocity: float) -> SystematicsCorrection:
    tilt, tilt_err = tilt_recoils(sys, v_incident, recoil_velocity)
    # A launch velocity shifts v_x before and after the bounce alike, so its
    # contribution to the velocity change is zero; only its uncertainty
    # (through mirror selection) is carried.
    return SystematicsCorrection(tilt, tilt_err, 0.0, abs(sys.launch_velocity_err) / recoil_velocity)


def systematics_correction(fit: TrajectoryFit, sys: Systematics, v_incident: float,
                           recoil_velocity: float | None = None) -> TrajectoryFit:
    """Remove the alignment contributions from a fitted recoil number."""
    if "systematics" in fit.corrections:
        raise CorrectionError("systematics correction already applied")
    v_rec = fit.recoil_velocity if recoil_velocity is None else recoil_velocity
    c = systematics_terms(sys, v_incident, v_rec)
    shift = c.tilt_recoils + c.launch_recoils
    err = math.sqrt(fit.recoils_err**2 + c.tilt_err**2 + c.launch_err**2)
    return replace(fit, recoils=fit.recoils - shift, recoils_err=err,
                   delta_vx=fit.delta_vx - shift * v_rec,
                   corrections=fit.corrections + ("systematics",),
                   correction_recoils=fit.correction_recoils + shift)
