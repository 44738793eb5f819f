"""Beer-Lambert photon-count simulation and the log transform back to
line integrals.

Mean detected count per ray is n0 * exp(-line integral).  Counts are
Poisson draws from the counter-based sampler in :mod:`tomobench.rng`,
keyed by (seed, ray index); seed 0 selects the deterministic rounding
mode used for noise-free data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .phantoms import ScanGeometry
from .projector import Sinogram


@dataclass(frozen=True)
class PhotonMeasurement:
    """Photon counts per ray plus the incident count per ray."""

    geometry: ScanGeometry
    counts: np.ndarray  # (n_angles, n_det) int64, nonnegative
    n0: float
    seed: int  # 0 = deterministic / noise-free mode

    def __post_init__(self):
        c = np.asarray(self.counts)
        if not np.issubdtype(c.dtype, np.integer):
            raise ValueError("counts must be integers")
        c = c.astype(np.int64)
        if c.shape != (self.geometry.n_angles, self.geometry.n_det):
            raise ValueError(
                f"counts shape {c.shape} does not match geometry "
                f"({self.geometry.n_angles}, {self.geometry.n_det})")
        if (c < 0).any():
            raise ValueError("counts must be nonnegative")
        if self.n0 <= 0:
            raise ValueError("n0 must be positive")
        object.__setattr__(self, "counts", c)


def expected_counts(sino: Sinogram, n0: float) -> np.ndarray:
    """Mean counts lambda_i = n0 * exp(-sino_i), elementwise."""
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    return n0 * np.exp(-sino.values)


def simulate_counts(sino: Sinogram, n0: float, seed: int) -> PhotonMeasurement:
    """Draw photon counts for every ray.

    seed != 0: counts_i ~ Poisson(lambda_i) from the SplitMix64
    counter stream keyed by (seed, ray index) -- a pure function of
    (sino, n0, seed), independent of evaluation order.
    seed == 0: counts_i = round(lambda_i), the noise-free mode.
    """
    lam = expected_counts(sino, n0)
    if seed == 0:
        counts = np.rint(lam).astype(np.int64)
    else:
        counts = rng.poisson_counts(
            lam.ravel(), seed, np.arange(lam.size)).reshape(lam.shape)
    return PhotonMeasurement(geometry=sino.geometry, counts=counts,
                             n0=float(n0), seed=seed)


def log_transform(meas: PhotonMeasurement,
                  floor_counts: float = 0.5) -> Sinogram:
    """Line-integral estimates b_i = ln(n0 / max(counts_i, floor)).

    The floor keeps zero-count rays finite; results are clamped below at
    zero (counts above n0 would otherwise go negative).
    """
    if floor_counts <= 0:
        raise ValueError("floor_counts must be positive")
    c = np.maximum(meas.counts.astype(np.float64), floor_counts)
    b = np.maximum(np.log(meas.n0 / c), 0.0)
    return Sinogram(geometry=meas.geometry, values=b)
