"""Counter-based random numbers.

Every draw is a pure function of (seed, atom index, channel, draw index),
built from the SplitMix64 finalizer. Results therefore do not depend on the
order in which atoms are processed or on how they are split across workers.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# channels
INITIAL_POSITION = 1
INITIAL_VELOCITY = 2
PHOTON_COUNT = 3
EMISSION = 4
FRAME_NOISE = 5
SHOT = 6


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def counter_bits(seed: int, ids, channel: int, n_draws: int) -> np.ndarray:
    """uint64 array of shape (len(ids), n_draws)."""
    ids = np.asarray(ids, dtype=np.uint64).reshape(-1)
    with np.errstate(over="ignore"):
        key = _mix(np.array([seed], dtype=np.uint64) + _GOLDEN)
        key = _mix(key ^ (np.array([channel + 1], dtype=np.uint64) * _GOLDEN))
        per_atom = _mix(key ^ (ids * _GOLDEN + np.uint64(1)))
        draws = (np.arange(1, n_draws + 1, dtype=np.uint64) * _GOLDEN)
        return _mix(per_atom[:, None] + draws[None, :])


def counter_uniform(seed: int, ids, channel: int, n_draws: int = 1) -> np.ndarray:
    """Uniform variates in the open interval (0, 1)."""
    bits = counter_bits(seed, ids, channel, n_draws) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def counter_normal(seed: int, ids, channel: int, n_draws: int = 1) -> np.ndarray:
    return ndtri(counter_uniform(seed, ids, channel, n_draws))


def counter_poisson(seed: int, ids, channel: int, mean) -> np.ndarray:
    """One Poisson draw per id by CDF inversion."""
    from scipy.stats import poisson

    u = counter_uniform(seed, ids, channel, 1)[:, 0]
    mean = np.broadcast_to(np.asarray(mean, dtype=float), u.shape)
    out = np.zeros(u.shape, dtype=np.int64)
    pos = mean > 0
    out[pos] = poisson.ppf(u[pos], mean[pos]).astype(np.int64)
    return out


def isotropic_sum(seed: int, ids, channel: int, counts) -> np.ndarray:
    """Sum of ``counts[i]`` independent isotropic unit vectors for each id.

    Returns an array of shape (len(ids), 3) holding (x, y, z) components.
    """
    ids = np.asarray(ids).reshape(-1)
    counts = np.asarray(counts, dtype=np.int64).reshape(-1)
    out = np.zeros((ids.size, 3))
    if ids.size == 0:
        return out
    n_max = int(counts.max(initial=0))
    if n_max == 0:
        return out
    chunk = max(1, 2_000_000 // (2 * n_max))
    for start in range(0, ids.size, chunk):
        sl = slice(start, start + chunk)
        u = counter_uniform(seed, ids[sl], channel, 2 * n_max).reshape(-1, n_max, 2)
        cos_t = 2 * u[..., 0] - 1
        sin_t = np.sqrt(1 - cos_t**2)
        phi = 2 * np.pi * u[..., 1]
        mask = np.arange(n_max)[None, :] < counts[sl, None]
        out[sl, 0] = np.sum(np.where(mask, sin_t * np.cos(phi), 0.0), axis=1)
        out[sl, 1] = np.sum(np.where(mask, sin_t * np.sin(phi), 0.0), axis=1)
        out[sl, 2] = np.sum(np.where(mask, cos_t, 0.0), axis=1)
    return out


def frame_generator(seed: int, frame_index: int) -> np.random.Generator:
    """Independent generator for image shot noise of one frame."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), FRAME_NOISE << 32 | frame_index]))


def derived_seed(seed: int, index: int, channel: int = SHOT) -> int:
    """Independent 64-bit seed for the ``index``-th repetition of a run."""
    return int(counter_bits(seed, [index], channel, 1)[0, 0])
