import numpy as np
import pytest

from tomobench import ImageGrid, derive_geometry, forward_project


def area_averaged_disk(side=128, radius=30.0, mu=0.01, subsamples=4,
                       pixel_size=1.0) -> ImageGrid:
    """Disk of attenuation mu rasterized with per-pixel area averaging,
    so projections can be compared against the continuous chord formula."""
    offsets = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    img = np.zeros((side, side))
    base = np.arange(side) + 0.5 - side / 2.0
    for dx in offsets:
        for dy in offsets:
            xx, yy = np.meshgrid(base + dx, base + dy)
            img += (xx * xx + yy * yy) <= radius * radius
    return ImageGrid(img / subsamples**2 * mu, pixel_size=pixel_size)


def pearson_two_pass(a: np.ndarray, b: np.ndarray) -> float:
    """Independent two-pass Pearson oracle: explicit means first, then
    accumulation of centered products."""
    a = a.ravel()
    b = b.ravel()
    mean_a = sum(float(v) for v in a) / a.size
    mean_b = sum(float(v) for v in b) / b.size
    sab = saa = sbb = 0.0
    for va, vb in zip(a, b):
        da, db = float(va) - mean_a, float(vb) - mean_b
        sab += da * db
        saa += da * da
        sbb += db * db
    return sab / (saa**0.5 * sbb**0.5)


@pytest.fixture(scope="session")
def disk128():
    return area_averaged_disk()


@pytest.fixture(scope="session")
def disk_sino32(disk128):
    geom = derive_geometry(disk128, 32)
    return forward_project(disk128, geom)
