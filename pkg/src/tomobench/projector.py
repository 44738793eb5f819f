"""Parallel-beam Radon forward model and its exact algebraic adjoint.

Joseph's ray-driven method: each ray steps along the image axis it is most
aligned with and linearly interpolates across the other axis; the step
weights are assembled once per (geometry, grid) pair into a sparse matrix,
so the adjoint is the literal transpose of the forward operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import rng
from .phantoms import ImageGrid, ScanGeometry


@dataclass(frozen=True)
class Sinogram:
    """Line-integral data on a geometry, shape (n_angles, n_det)."""

    geometry: ScanGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.geometry.n_angles, self.geometry.n_det):
            raise ValueError(
                f"sinogram shape {v.shape} does not match geometry "
                f"({self.geometry.n_angles}, {self.geometry.n_det})")
        if not np.isfinite(v).all():
            raise ValueError("sinogram values must be finite")
        object.__setattr__(self, "values", v)


_MATRIX_CACHE: dict[tuple, sp.csr_matrix] = {}
_MATRIX_CACHE_MAX = 8


def _geometry_key(geom: ScanGeometry, side_px: int, pixel_size: float) -> tuple:
    return (side_px, float(pixel_size), geom.n_det, float(geom.det_spacing),
            tuple(geom.angles_rad.tolist()))


def system_matrix(geom: ScanGeometry, side_px: int,
                  pixel_size: float = 1.0) -> sp.csr_matrix:
    """Sparse Joseph weights, shape (n_angles*n_det, side_px**2)."""
    key = _geometry_key(geom, side_px, pixel_size)
    cached = _MATRIX_CACHE.get(key)
    if cached is not None:
        return cached

    n = side_px
    px = pixel_size
    dets = geom.det_offsets()
    centers = (np.arange(n) + 0.5 - n / 2.0) * px

    rows_out, cols_out, vals_out = [], [], []
    for a, theta in enumerate(geom.angles_rad):
        ct, st = math.cos(theta), math.sin(theta)
        # Ray of offset s: points p with p.n = s, n = (cos t, sin t).
        if abs(ct) >= abs(st):
            # near-vertical rays: step across rows, interpolate columns
            # x = (s - y*sin)/cos at each row center y
            x = (dets[:, None] - centers[None, :] * st) / ct  # (n_det, n)
            frac = x / px + n / 2.0 - 0.5
            step_len = px / abs(ct)
            along_rows = True
        else:
            # near-horizontal rays: step across columns, interpolate rows
            y = (dets[:, None] - centers[None, :] * ct) / st
            frac = y / px + n / 2.0 - 0.5
            step_len = px / abs(st)
            along_rows = False

        base = np.floor(frac)
        w_hi = frac - base
        lo = base.astype(np.int64)
        det_idx = np.broadcast_to(np.arange(geom.n_det)[:, None], frac.shape)
        line_idx = np.broadcast_to(np.arange(n)[None, :], frac.shape)
        for offset, weight in ((0, (1.0 - w_hi) * step_len),
                               (1, w_hi * step_len)):
            cell = lo + offset
            keep = (cell >= 0) & (cell < n) & (weight > 0)
            if not keep.any():
                continue
            if along_rows:
                pix = line_idx[keep] * n + cell[keep]  # row=line, col=cell
            else:
                pix = cell[keep] * n + line_idx[keep]  # row=cell, col=line
            rows_out.append(a * geom.n_det + det_idx[keep])
            cols_out.append(pix)
            vals_out.append(weight[keep])

    mat = sp.csr_matrix(
        (np.concatenate(vals_out),
         (np.concatenate(rows_out), np.concatenate(cols_out))),
        shape=(geom.n_angles * geom.n_det, n * n))
    mat.sum_duplicates()
    if len(_MATRIX_CACHE) >= _MATRIX_CACHE_MAX:
        _MATRIX_CACHE.pop(next(iter(_MATRIX_CACHE)))
    _MATRIX_CACHE[key] = mat
    return mat


def _require_coverage(geom: ScanGeometry, side_px: int, pixel_size: float):
    if not geom.covers(side_px, pixel_size):
        raise ValueError(
            f"detector extent {geom.n_det * geom.det_spacing:g} does not cover "
            f"the image diagonal {side_px * pixel_size * math.sqrt(2):g}")


def forward_project(image: ImageGrid, geom: ScanGeometry) -> Sinogram:
    """Line integrals of the image along every (angle, detector bin) ray."""
    _require_coverage(geom, image.side_px, image.pixel_size)
    mat = system_matrix(geom, image.side_px, image.pixel_size)
    vals = mat @ image.values.ravel()
    return Sinogram(geometry=geom,
                    values=vals.reshape(geom.n_angles, geom.n_det))


def back_project(sino: Sinogram, side_px: int) -> ImageGrid:
    """Exact transpose of forward_project (same interpolation weights)."""
    geom = sino.geometry
    pixel_size = geom.det_spacing
    _require_coverage(geom, side_px, pixel_size)
    mat = system_matrix(geom, side_px, pixel_size)
    vals = mat.T @ sino.values.ravel()
    return ImageGrid(vals.reshape(side_px, side_px), pixel_size=pixel_size)


def estimate_operator_norm(geom: ScanGeometry, side_px: int,
                           iters: int) -> float:
    """Spectral norm of the projector via power iteration on A^T A.

    The start vector is a fixed counter-based draw, so the estimate is a
    pure function of the arguments; the Rayleigh-quotient estimate is
    nondecreasing in the iteration count.
    """
    if iters < 10:
        raise ValueError("iters must be at least 10")
    mat = system_matrix(geom, side_px, geom.det_spacing)
    v = rng.counter_uniform(0, rng.DOMAIN_OPNORM,
                            np.arange(side_px * side_px), 0) - 0.5
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        lam = float(v @ w)  # Rayleigh quotient of A^T A
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return math.sqrt(lam)
