"""Image grid, scan geometry, and phantom generators.

Coordinate convention used across the package: pixel (row i, col j) of an
N-pixel-per-side grid has center x = (j + 0.5 - N/2) * pixel_size,
y = (i + 0.5 - N/2) * pixel_size, with the grid centered on the origin.
Phantom ellipse parameters live in normalized coordinates where the image
half-side is 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import rng


@dataclass(frozen=True)
class ImageGrid:
    """Square 2D attenuation map (the object and all reconstructions)."""

    values: np.ndarray  # (side_px, side_px) float64, row-major
    pixel_size: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError(f"image values must be square 2D, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("image values must be finite")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")
        object.__setattr__(self, "values", v)

    @property
    def side_px(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ScanGeometry:
    """Parallel-beam acquisition: projection angles and a centered detector.

    Detector bin k sits at signed offset (k + 0.5 - n_det/2) * det_spacing
    from the rotation center, measured along the detector axis.
    """

    angles_rad: np.ndarray  # strictly increasing, in [0, pi)
    n_det: int
    det_spacing: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.angles_rad, dtype=np.float64)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("angles_rad must be a nonempty 1D array")
        if (a < 0).any() or (a >= math.pi).any():
            raise ValueError("angles must lie in [0, pi)")
        if a.size > 1 and not (np.diff(a) > 0).all():
            raise ValueError("angles must be strictly increasing")
        if self.n_det < 1:
            raise ValueError("n_det must be positive")
        if self.det_spacing <= 0:
            raise ValueError("det_spacing must be positive")
        object.__setattr__(self, "angles_rad", a)

    @property
    def n_angles(self) -> int:
        return self.angles_rad.size

    def det_offsets(self) -> np.ndarray:
        return (np.arange(self.n_det) + 0.5 - self.n_det / 2.0) * self.det_spacing

    def covers(self, side_px: int, pixel_size: float) -> bool:
        need = side_px * pixel_size * math.sqrt(2.0)
        return self.n_det * self.det_spacing >= need - 1e-9


class PhantomKind(enum.Enum):
    SHEPP_LOGAN = "shepp_logan"
    RANDOM_ELLIPSES = "random_ellipses"


@dataclass(frozen=True)
class PhantomSpec:
    kind: PhantomKind
    seed: int
    side_px: int
    n_ellipses: int = 8

    def __post_init__(self):
        if self.side_px < 1:
            raise ValueError("side_px must be positive")
        if self.n_ellipses < 1:
            raise ValueError("n_ellipses must be positive")


# Toft's contrast-adjusted Shepp-Logan head: (value, a, b, x0, y0, phi_deg).
# Values stay in [0, 1] without rescaling.
_SHEPP_LOGAN_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


def _pixel_centers(side_px: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates in normalized units (half-side = 1)."""
    c = (2.0 * np.arange(side_px) + 1.0 - side_px) / side_px
    return np.meshgrid(c, c)  # (X over cols, Y over rows)


def _add_ellipse(img, xx, yy, value, a, b, x0, y0, phi_rad):
    ct, st = math.cos(phi_rad), math.sin(phi_rad)
    xr = (xx - x0) * ct + (yy - y0) * st
    yr = -(xx - x0) * st + (yy - y0) * ct
    img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value


def make_shepp_logan(side_px: int) -> ImageGrid:
    """Standard 10-ellipse Shepp-Logan head phantom.

    Rasterized by pixel-center sampling of the additive analytic ellipse
    sum; output clamped to [0, 1].
    """
    if side_px < 16:
        raise ValueError("side_px must be at least 16")
    xx, yy = _pixel_centers(side_px)
    img = np.zeros((side_px, side_px))
    for value, a, b, x0, y0, phi_deg in _SHEPP_LOGAN_ELLIPSES:
        _add_ellipse(img, xx, yy, value, a, b, x0, y0, math.radians(phi_deg))
    return ImageGrid(np.clip(img, 0.0, 1.0))


def shepp_logan_value_at(x: float, y: float) -> float:
    """Analytic ellipse-sum value at a normalized coordinate, clamped to [0,1].

    Independent of the rasterizer; used to pin pixel values in tests.
    """
    total = 0.0
    for value, a, b, x0, y0, phi_deg in _SHEPP_LOGAN_ELLIPSES:
        phi = math.radians(phi_deg)
        xr = (x - x0) * math.cos(phi) + (y - y0) * math.sin(phi)
        yr = -(x - x0) * math.sin(phi) + (y - y0) * math.cos(phi)
        if (xr / a) ** 2 + (yr / b) ** 2 <= 1.0:
            total += value
    return min(max(total, 0.0), 1.0)


def make_random_ellipses(spec: PhantomSpec) -> ImageGrid:
    """Random additive ellipse phantom, deterministic in spec.seed.

    Centers are uniform in the disk of radius 0.8 (normalized units),
    semi-axes uniform in [0.05, 0.3], rotations uniform in [0, pi),
    intensities uniform in [0.2, 0.8]; the sum is clamped to [0, 1].
    """
    if spec.kind is not PhantomKind.RANDOM_ELLIPSES:
        raise ValueError(f"spec.kind must be RANDOM_ELLIPSES, got {spec.kind}")
    xx, yy = _pixel_centers(spec.side_px)
    img = np.zeros((spec.side_px, spec.side_px))
    for e in range(spec.n_ellipses):
        u = [float(rng.counter_uniform(spec.seed, rng.DOMAIN_PHANTOM, e, k))
             for k in range(6)]
        r = 0.8 * math.sqrt(u[0])
        az = 2.0 * math.pi * u[1]
        x0, y0 = r * math.cos(az), r * math.sin(az)
        a = 0.05 + 0.25 * u[2]
        b = 0.05 + 0.25 * u[3]
        phi = math.pi * u[4]
        value = 0.2 + 0.6 * u[5]
        _add_ellipse(img, xx, yy, value, a, b, x0, y0, phi)
    return ImageGrid(np.clip(img, 0.0, 1.0))


def make_phantom(spec: PhantomSpec) -> ImageGrid:
    if spec.kind is PhantomKind.SHEPP_LOGAN:
        return make_shepp_logan(spec.side_px)
    return make_random_ellipses(spec)


def derive_geometry(image: ImageGrid, n_angles: int) -> ScanGeometry:
    """Full-angle geometry whose detector covers the image diagonal.

    Angles are k*pi/n_angles; the bin count is ceil(side*sqrt(2)) rounded
    up to the next even integer; bin spacing equals the pixel size.
    """
    if n_angles < 1:
        raise ValueError("n_angles must be positive")
    angles = np.arange(n_angles) * (math.pi / n_angles)
    n_det = math.ceil(image.side_px * math.sqrt(2.0))
    if n_det % 2:
        n_det += 1
    return ScanGeometry(angles_rad=angles, n_det=n_det,
                        det_spacing=image.pixel_size)
