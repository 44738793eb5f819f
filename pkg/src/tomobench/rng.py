"""Counter-based randomness primitives.

Every random quantity in this package is a pure function of explicit
integer words (seed, domain tag, stream, draw counter), so work items can
be generated in any order and on any number of threads with bit-identical
results.  The bit mixer is the SplitMix64 finalizer (Steele, Lea & Flood,
"Fast splittable pseudorandom number generators", OOPSLA 2014); each input
word is mixed to full avalanche and folded into the running state.

Poisson sampling uses inversion by sequential search for small means and
Hoermann's PTRS transformed rejection for large means, both consuming
uniforms from the counter stream.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)

# Domain tags keep independent uses of the same seed from colliding.
DOMAIN_PHOTON = 0x50484F54  # "PHOT"
DOMAIN_PHANTOM = 0x5048414E  # "PHAN"
DOMAIN_OPNORM = 0x4F504E52  # "OPNR"
DOMAIN_SWEEP = 0x53575045  # "SWPE"


def _mix(z: np.uint64 | np.ndarray) -> np.uint64 | np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    return z ^ (z >> np.uint64(31))


def _as_u64(word) -> np.uint64 | np.ndarray:
    if isinstance(word, np.ndarray):
        return word.astype(np.uint64)
    return np.uint64(int(word) & _MASK64)


def counter_u64(seed: int, *words) -> np.uint64 | np.ndarray:
    """Hash (seed, word, word, ...) to 64 bits; ndarray words broadcast."""
    with np.errstate(over="ignore"):
        h = _mix(_as_u64(seed) + _GOLDEN)
        for w in words:
            h = _mix(h ^ _mix(_as_u64(w) + _GOLDEN))
    return h


def counter_uniform(seed: int, *words) -> np.float64 | np.ndarray:
    """Uniform double in [0, 1), a pure function of the input words."""
    bits = counter_u64(seed, *words)
    return (bits >> np.uint64(11)) * np.float64(2.0**-53)


def _poisson_inversion(lam, seed, stream):
    """Sequential-search inversion; exact for small means (lam < 10)."""
    u = np.atleast_1d(counter_uniform(seed, DOMAIN_PHOTON, stream, 0))
    k = np.zeros_like(lam, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    # P(X > 200 | lam < 10) underflows double precision; the cap only
    # guards against a u frozen above a rounded-off CDF plateau.
    for _ in range(200):
        if not active.any():
            break
        k[active] += 1
        p[active] *= lam[active] / k[active]
        cdf[active] += p[active]
        active &= u > cdf
    return k


def _poisson_ptrs(lam, seed, stream):
    """Hoermann's PTRS transformed rejection; exact for lam >= 10.

    Each attempt consumes the uniform pair (2*attempt, 2*attempt + 1) of
    the ray's counter stream, so the draw count of one ray never shifts
    another ray's stream.
    """
    b = 0.931 + 2.53 * np.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_lam = np.log(lam)

    out = np.full(lam.shape, -1, dtype=np.int64)
    pending = np.arange(lam.size)
    for attempt in range(256):
        if pending.size == 0:
            break
        sub = pending
        u = counter_uniform(seed, DOMAIN_PHOTON, stream[sub], 2 * attempt) - 0.5
        v = counter_uniform(seed, DOMAIN_PHOTON, stream[sub], 2 * attempt + 1)
        us = 0.5 - np.abs(u)
        usable = us > 0.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            k = np.floor((2.0 * a[sub] / np.where(usable, us, 1.0) + b[sub]) * u
                         + lam[sub] + 0.43)
            accept = usable & (us >= 0.07) & (v <= v_r[sub])
            tryable = usable & ~accept & (k >= 0) & ((us >= 0.013) | (v <= us))
            lhs = np.log(v) + np.log(inv_alpha[sub]) - np.log(
                a[sub] / (us * us) + b[sub])
            rhs = k * log_lam[sub] - lam[sub] - gammaln(k + 1.0)
            accept |= tryable & (lhs <= rhs)
        done = sub[accept]
        out[done] = k[accept].astype(np.int64)
        pending = sub[~accept]
    if pending.size:  # pragma: no cover - acceptance rate of PTRS is >0.85
        out[pending] = np.rint(lam[pending]).astype(np.int64)
    return out


def poisson_counts(lam: np.ndarray, seed: int, stream: np.ndarray) -> np.ndarray:
    """Poisson draws, one per element, keyed by (seed, stream index).

    Exact-distribution sampling: inversion below mean 10, PTRS above.
    The result is a pure function of (lam, seed, stream).
    """
    lam = np.asarray(lam, dtype=np.float64).ravel()
    stream = np.asarray(stream, dtype=np.uint64).ravel()
    if lam.shape != stream.shape:
        raise ValueError("lam and stream must have matching shapes")
    if (lam <= 0).any():
        raise ValueError("Poisson means must be positive")
    out = np.empty(lam.shape, dtype=np.int64)
    small = lam < 10.0
    if small.any():
        out[small] = _poisson_inversion(lam[small], seed, stream[small])
    if (~small).any():
        out[~small] = _poisson_ptrs(lam[~small], seed, stream[~small])
    return out
