"""Gaussian scale-space derivatives and a closed-form symmetric eigensolver.

Tubularity filters read local shape from the eigenvalues of the Hessian of
the Gaussian-smoothed volume. This module provides the three stages: smoothing
at a physical scale sigma (mm, converted per axis to voxel units), the six
unique second derivatives in intensity/mm^2, and eigenvalues sorted by
magnitude. Second derivatives are gamma-normalized by sigma^2 so responses at
different scales are comparable and the scale of peak response tracks the
structure radius.

Derivatives are taken as central differences of the smoothed volume. The
mixed components reuse one first-derivative pass per axis, so hxy and hyx are
the same array by construction, not merely equal to rounding.

The eigensolver uses the trigonometric closed form for real symmetric 3x3
matrices (branch-free, vectorizes over whole volumes) and falls back to the
iterative LAPACK routine on the rare near-degenerate voxels where the closed
form loses digits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .volume import Volume3D

__all__ = [
    "SymMat3Field",
    "EigenTriple",
    "gaussian_smooth",
    "hessian_at_scale",
    "eig_sym3",
    "eig_field",
]


class EigenTriple(NamedTuple):
    """Eigenvalues ordered by increasing magnitude, |l1| <= |l2| <= |l3|."""

    l1: float
    l2: float
    l3: float


@dataclass(frozen=True)
class SymMat3Field:
    """Per-voxel symmetric 3x3 matrices, six unique components each."""

    hxx: np.ndarray
    hyy: np.ndarray
    hzz: np.ndarray
    hxy: np.ndarray
    hxz: np.ndarray
    hyz: np.ndarray
    sigma_mm: float
    spacing: tuple
    origin: tuple

    def __post_init__(self):
        shape = self.hxx.shape
        for name in ("hyy", "hzz", "hxy", "hxz", "hyz"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"component {name} shape mismatch")


def gaussian_smooth(vol: Volume3D, sigma_mm: float) -> Volume3D:
    """Separable Gaussian smoothing with sigma given in physical mm."""
    if not (np.isfinite(sigma_mm) and sigma_mm > 0):
        raise ValueError(f"sigma must be positive, got {sigma_mm}")
    voxel_sigma = [sigma_mm / s for s in vol.spacing]
    out = ndimage.gaussian_filter(
        vol.data.astype(np.float64), voxel_sigma, mode="nearest", truncate=6.0
    )
    return vol.with_data(out)


def hessian_at_scale(vol: Volume3D, sigma_mm: float) -> SymMat3Field:
    """Gamma-normalized second derivatives of the smoothed volume.

    Scales below the smallest voxel pitch are under-resolved; they are clamped
    up to that pitch with a warning rather than rejected, so coarse default
    scale grids still run on coarse volumes.
    """
    min_spacing = min(vol.spacing)
    if sigma_mm < min_spacing:
        warnings.warn(
            f"sigma {sigma_mm} mm below voxel pitch {min_spacing} mm, clamping",
            stacklevel=2,
        )
        sigma_mm = min_spacing
    data = vol.data.astype(np.float64)
    voxel_sigma = [sigma_mm / s for s in vol.spacing]
    norm = sigma_mm**2

    def deriv(orders):
        # Gaussian derivative kernels differentiate in index units; divide by
        # spacing^order per axis to express the derivative per mm
        out = ndimage.gaussian_filter(
            data, voxel_sigma, order=orders, mode="nearest", truncate=6.0
        )
        for ax, o in enumerate(orders):
            if o:
                out /= vol.spacing[ax] ** o
        return norm * out

    return SymMat3Field(
        hxx=deriv((2, 0, 0)),
        hyy=deriv((0, 2, 0)),
        hzz=deriv((0, 0, 2)),
        hxy=deriv((1, 1, 0)),
        hxz=deriv((1, 0, 1)),
        hyz=deriv((0, 1, 1)),
        sigma_mm=sigma_mm,
        spacing=vol.spacing,
        origin=vol.origin,
    )


def _sort_by_magnitude(vals: np.ndarray) -> np.ndarray:
    # primary key |v|, ties broken by signed value ascending (deterministic)
    order = np.lexsort((vals, np.abs(vals)), axis=-1)
    return np.take_along_axis(vals, order, axis=-1)


def eig_field(field: SymMat3Field) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues of every voxel's matrix, each sorted by magnitude."""
    a, b, c = field.hxx, field.hyy, field.hzz
    d, e, f = field.hxy, field.hxz, field.hyz
    q = (a + b + c) / 3.0
    p2 = (a - q) ** 2 + (b - q) ** 2 + (c - q) ** 2 + 2.0 * (d**2 + e**2 + f**2)
    p = np.sqrt(p2 / 6.0)
    scale = np.maximum(p, 1e-300)
    ba, bb, bc = (a - q) / scale, (b - q) / scale, (c - q) / scale
    bd, be, bf = d / scale, e / scale, f / scale
    # half the determinant of the shifted, scaled matrix
    r = 0.5 * (
        ba * (bb * bc - bf**2) - bd * (bd * bc - bf * be) + be * (bd * bf - bb * be)
    )
    r = np.clip(r, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l_hi = q + 2.0 * p * np.cos(phi)
    l_lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l_mid = 3.0 * q - l_hi - l_lo
    vals = np.stack([l_lo, l_mid, l_hi], axis=-1)

    # isotropic voxels: all eigenvalues equal the mean diagonal
    iso = p <= 1e-12 * (1.0 + np.abs(q))
    if np.any(iso):
        vals[iso] = q[iso][..., None]
    # near-degenerate discriminant: recompute those few voxels iteratively
    hard = (~iso) & (np.abs(r) > 1.0 - 1e-12)
    if np.any(hard):
        mats = np.empty(hard.sum() * 9).reshape(-1, 3, 3)
        comp = [(a, 0, 0), (d, 0, 1), (e, 0, 2), (d, 1, 0), (b, 1, 1), (f, 1, 2),
                (e, 2, 0), (f, 2, 1), (c, 2, 2)]
        for arr, i, j in comp:
            mats[:, i, j] = arr[hard]
        vals[hard] = np.linalg.eigvalsh(mats)

    vals = _sort_by_magnitude(vals)
    return vals[..., 0], vals[..., 1], vals[..., 2]


def eig_sym3(m) -> EigenTriple:
    """Eigenvalues of one symmetric 3x3 matrix, ordered by |l1| <= |l2| <= |l3|."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-8 * (1.0 + np.abs(m).max())):
        raise ValueError("matrix is not symmetric")
    one = lambda v: np.array([v], dtype=np.float64)  # noqa: E731
    field = SymMat3Field(
        hxx=one(m[0, 0]), hyy=one(m[1, 1]), hzz=one(m[2, 2]),
        hxy=one(0.5 * (m[0, 1] + m[1, 0])),
        hxz=one(0.5 * (m[0, 2] + m[2, 0])),
        hyz=one(0.5 * (m[1, 2] + m[2, 1])),
        sigma_mm=1.0, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
    )
    l1, l2, l3 = eig_field(field)
    return EigenTriple(float(l1[0]), float(l2[0]), float(l3[0]))
