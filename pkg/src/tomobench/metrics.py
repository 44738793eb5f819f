"""Evaluation metrics: Pearson correlation and scattering-transform
L2 distance.

The scattering features are the order-0/1/2 cascade S0 = x*phi,
S1 = |x*psi_{j,l}| * phi, S2 = ||x*psi_{j1,l1}| * psi_{j2,l2}| * phi
(j2 > j1), each low-passed map subsampled by 2^j_scales and flattened in
the fixed order: S0, then S1 by (j, l), then S2 by (j1, l1, j2, l2),
all lexicographic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phantoms import ImageGrid
from .wavelets import get_filter_bank


class UndefinedCorrelationError(ValueError):
    """Raised when both images are constant and r is undefined."""


@dataclass(frozen=True)
class ScatteringConfig:
    j_scales: int = 3
    n_orientations: int = 6
    order: int = 2

    def __post_init__(self):
        if self.j_scales < 1 or self.n_orientations < 1:
            raise ValueError("j_scales and n_orientations must be positive")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")


@dataclass(frozen=True)
class MetricsReport:
    pearson_r: float
    one_minus_r: float
    scattering_l2: float

    @classmethod
    def from_images(cls, a: ImageGrid, b: ImageGrid,
                    cfg: ScatteringConfig = ScatteringConfig()):
        r = pearson_r(a, b)
        return cls(pearson_r=r, one_minus_r=1.0 - r,
                   scattering_l2=scattering_distance(a, b, cfg))


def _values(img) -> np.ndarray:
    return img.values if isinstance(img, ImageGrid) else np.asarray(img)


def pearson_r(a: ImageGrid, b: ImageGrid) -> float:
    """Sample Pearson correlation over flattened pixels.

    Raises UndefinedCorrelationError when both images are constant; when
    exactly one is constant the correlation is reported as 0.
    """
    av = _values(a).ravel()
    bv = _values(b).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"image shapes differ: {av.shape} vs {bv.shape}")
    a_const = np.ptp(av) == 0.0
    b_const = np.ptp(bv) == 0.0
    if a_const and b_const:
        raise UndefinedCorrelationError(
            "Pearson correlation is undefined for two constant images")
    if a_const or b_const:
        return 0.0
    ac = av - av.mean()
    bc = bv - bv.mean()
    sab = float(ac @ bc)
    saa = float(ac @ ac)
    sbb = float(bc @ bc)
    # dot-product form keeps r(a, a) = 1 and r(a, -a) = -1 exact
    return float(np.clip(sab / np.sqrt(saa * sbb), -1.0, 1.0))


def _lowpass_subsample(field_hat: np.ndarray, low: np.ndarray,
                       stride: int) -> np.ndarray:
    pooled = np.fft.ifft2(field_hat * low).real
    return pooled[::stride, ::stride]


def scattering_coeffs(image: ImageGrid,
                      cfg: ScatteringConfig = ScatteringConfig()) -> np.ndarray:
    """Translation-tolerant scattering feature vector of the image."""
    v = _values(image)
    side = v.shape[0]
    if side % (1 << cfg.j_scales) != 0:
        raise ValueError(
            f"image side {side} must be divisible by 2^{cfg.j_scales}")
    bank = get_filter_bank(side, cfg.j_scales, cfg.n_orientations)
    stride = 1 << cfg.j_scales
    low = bank.low_pass

    x_hat = np.fft.fft2(v)
    maps = [_lowpass_subsample(x_hat, low, stride)]

    first_order = []  # (j1, modulus field fft) in (j, l) order
    for j1, _l1, psi in bank.wavelets:
        u1 = np.abs(np.fft.ifft2(x_hat * psi))
        u1_hat = np.fft.fft2(u1)
        maps.append(_lowpass_subsample(u1_hat, low, stride))
        first_order.append((j1, u1_hat))

    if cfg.order == 2:
        for j1, u1_hat in first_order:
            for j2, _l2, psi2 in bank.wavelets:
                if j2 <= j1:
                    continue
                u2 = np.abs(np.fft.ifft2(u1_hat * psi2))
                maps.append(_lowpass_subsample(np.fft.fft2(u2), low, stride))

    return np.concatenate([m.ravel() for m in maps])


def scattering_distance(a: ImageGrid, b: ImageGrid,
                        cfg: ScatteringConfig = ScatteringConfig()) -> float:
    """Euclidean distance between the two scattering feature vectors."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"image shapes differ: {va.shape} vs {vb.shape}")
    return float(np.linalg.norm(scattering_coeffs(a, cfg)
                                - scattering_coeffs(b, cfg)))
