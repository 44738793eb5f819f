"""Frequency-domain Morlet filter bank for the scattering features.

Filters are built directly on the DFT grid: an oriented Gaussian bump at
center frequency 3*pi/(4*2^j) with a DC-correction term (so every wavelet
integrates to zero), periodized over frequency aliases, plus an isotropic
Gaussian low-pass at the coarsest scale.  The bank is rescaled so the
Littlewood-Paley sum peaks at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SIGMA0 = 0.55
_XI0 = 3.0 * math.pi / 4.0
_SLANT_MULT = 5.0
_LP_CAP = 1.0499  # normalization target for the Littlewood-Paley peak
_ALIASES = range(-2, 3)


@dataclass(frozen=True)
class FilterBank:
    side: int
    j_scales: int
    n_orientations: int
    low_pass: np.ndarray  # (side, side) real, frequency domain
    wavelets: tuple  # tuple of (j, ell, (side, side) real array)

    def littlewood_paley(self) -> np.ndarray:
        """|phi|^2 + 0.5 * sum(|psi(w)|^2 + |psi(-w)|^2) on the DFT grid."""
        lp = self.low_pass ** 2
        for _, _, psi in self.wavelets:
            refl = np.roll(psi[::-1, ::-1], (1, 1), axis=(0, 1))  # psi(-w)
            lp = lp + 0.5 * (psi ** 2 + refl ** 2)
        return lp


def _freq_grid(side: int) -> tuple[np.ndarray, np.ndarray]:
    w = 2.0 * math.pi * np.fft.fftfreq(side)
    return np.meshgrid(w, w, indexing="ij")


def _gaussian_bump(w1, w2, center1, center2, sigma, slant_sq, cos_t, sin_t):
    """Periodized oriented Gaussian centered at (center1, center2)."""
    out = np.zeros_like(w1)
    for a1 in _ALIASES:
        for a2 in _ALIASES:
            d1 = w1 + 2.0 * math.pi * a1 - center1
            d2 = w2 + 2.0 * math.pi * a2 - center2
            par = d1 * cos_t + d2 * sin_t
            perp = -d1 * sin_t + d2 * cos_t
            out += np.exp(-0.5 * sigma * sigma
                          * (par * par + slant_sq * perp * perp))
    return out


def build_filter_bank(side: int, j_scales: int,
                      n_orientations: int) -> FilterBank:
    if side % (1 << j_scales) != 0:
        raise ValueError(
            f"image side {side} must be divisible by 2^{j_scales}")
    w1, w2 = _freq_grid(side)
    slant = _SLANT_MULT / n_orientations
    slant_sq = slant * slant

    wavelets = []
    for j in range(j_scales):
        sigma = _SIGMA0 * (1 << j)
        xi = _XI0 / (1 << j)
        beta = math.exp(-0.5 * sigma * sigma * xi * xi)
        for ell in range(n_orientations):
            theta = math.pi * ell / n_orientations
            ct, st = math.cos(theta), math.sin(theta)
            bump = _gaussian_bump(w1, w2, xi * ct, xi * st,
                                  sigma, slant_sq, ct, st)
            dc = _gaussian_bump(w1, w2, 0.0, 0.0, sigma, slant_sq, ct, st)
            wavelets.append((j, ell, bump - beta * dc))

    sigma_j = _SIGMA0 * (1 << j_scales)
    low = np.zeros_like(w1)
    for a1 in _ALIASES:
        for a2 in _ALIASES:
            d1 = w1 + 2.0 * math.pi * a1
            d2 = w2 + 2.0 * math.pi * a2
            low += np.exp(-0.5 * sigma_j * sigma_j * (d1 * d1 + d2 * d2))

    bank = FilterBank(side, j_scales, n_orientations, low, tuple(wavelets))
    # rescale the wavelets so the Littlewood-Paley sum peaks at _LP_CAP
    lp = bank.littlewood_paley()
    phi_sq = bank.low_pass ** 2
    psi_part = lp - phi_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        limit = np.where(psi_part > 1e-12, (_LP_CAP - phi_sq) / psi_part,
                         np.inf)
    alpha = math.sqrt(float(limit.min()))
    scaled = tuple((j, ell, alpha * psi) for j, ell, psi in bank.wavelets)
    return FilterBank(side, j_scales, n_orientations, low, scaled)


_BANK_CACHE: dict[tuple[int, int, int], FilterBank] = {}


def get_filter_bank(side: int, j_scales: int,
                    n_orientations: int) -> FilterBank:
    key = (side, j_scales, n_orientations)
    if key not in _BANK_CACHE:
        if len(_BANK_CACHE) >= 8:
            _BANK_CACHE.pop(next(iter(_BANK_CACHE)))
        _BANK_CACHE[key] = build_filter_bank(*key)
    return _BANK_CACHE[key]
