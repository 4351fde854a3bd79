"""Synthetic vascular phantoms with exact analytic ground truth.

Every generator returns the intensity volume together with the mask, the
centerline voxels, and the analytic quantities (radii, junction location,
cylinder volume) that tests and demos check against. Tubes have a Gaussian
cross-section ``exp(-d^2 / (2 r^2))`` with ``d`` the distance to the
centerline: for that profile the scale-space response of a tubularity filter
peaks at sigma = r, so the radius parameter doubles as the expected optimal
detection scale. The binary mask is the set of voxel centers within ``r`` of
the centerline.

Tubes span the full volume along their axis (no end caps inside the field of
view), so skeletonization recovers a border-to-border path of predictable
length. All randomness (noise) is drawn from a seeded generator; equal seeds
give bit-identical phantoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .volume import BinaryMask, Volume3D

__all__ = [
    "Phantom",
    "tube",
    "noisy_tube",
    "two_tubes",
    "y_junction",
    "blob",
    "plate",
]


@dataclass(frozen=True)
class Phantom:
    """A synthetic volume plus its exact ground truth."""

    volume: Volume3D
    mask: BinaryMask
    centerline: np.ndarray  # (N, 3) integer voxel indices, ordered along the structure
    meta: dict = field(default_factory=dict)


def _grids_mm(dims, spacing):
    return np.meshgrid(
        *(np.arange(n, dtype=np.float64) * s for n, s in zip(dims, spacing)),
        indexing="ij",
        sparse=True,
    )


def _segment_dist_sq(grids, p0, p1):
    """Squared distance from every voxel center to the segment p0-p1 (mm)."""
    p0 = np.asarray(p0, dtype=np.float64)
    d = np.asarray(p1, dtype=np.float64) - p0
    len_sq = float(d @ d)
    if len_sq == 0.0:
        return sum((g - c) ** 2 for g, c in zip(grids, p0))
    t = sum((g - c) * dc for g, c, dc in zip(grids, p0, d)) / len_sq
    t = np.clip(t, 0.0, 1.0)
    return sum((g - (c + t * dc)) ** 2 for g, c, dc in zip(grids, p0, d))


def _capsules(dims, spacing, segments, contrast=1.0):
    """Intensity and mask for a union of capsules (p0, p1, radius_mm)."""
    intensity = np.zeros(dims, dtype=np.float64)
    mask = np.zeros(dims, dtype=np.uint8)
    grids = _grids_mm(dims, spacing)
    for p0, p1, radius in segments:
        dist_sq = _segment_dist_sq(grids, p0, p1)
        np.maximum(intensity, contrast * np.exp(-dist_sq / (2.0 * radius**2)), out=intensity)
        mask |= (dist_sq <= radius**2).astype(np.uint8)
    return intensity, mask


def _centerline_voxels(dims, spacing, p0, p1):
    """Ordered, deduplicated voxel indices nearest to the segment, inside the volume."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    step = min(spacing) / 4.0
    n = max(int(np.ceil(np.linalg.norm(p1 - p0) / step)), 1)
    out, last = [], None
    for t in np.linspace(0.0, 1.0, n + 1):
        idx = tuple(int(round(c / s)) for c, s in zip(p0 + t * (p1 - p0), spacing))
        if all(0 <= i < d for i, d in zip(idx, dims)):
            if idx != last:
                out.append(idx)
                last = idx
    return np.array(sorted(set(out), key=out.index), dtype=np.int64).reshape(-1, 3)


def _add_noise(intensity, noise_sigma, seed):
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        intensity = intensity + rng.normal(0.0, noise_sigma, intensity.shape)
    return intensity


def _check_radius(radius_mm):
    if not (np.isfinite(radius_mm) and radius_mm > 0):
        raise ValueError(f"radius must be positive, got {radius_mm}")


def tube(
    radius_mm: float = 2.0,
    length_mm: float = 40.0,
    spacing: float = 0.5,
    cross_half_mm: float = 10.0,
    axis: int = 0,
    direction=None,
    contrast: float = 1.0,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Phantom:
    """Straight bright tube spanning the whole volume.

    Axis-aligned by default (``axis``); an explicit ``direction`` vector
    instead runs the tube through the central voxel along that direction,
    which is how the rotated-tube comparisons are built. ``length_mm`` sets
    the extent along the axis, ``cross_half_mm`` the padding around the tube.
    """
    _check_radius(radius_mm)
    n_axis = int(round(length_mm / spacing))
    n_cross = 2 * int(round(cross_half_mm / spacing)) + 1
    dims = tuple(n_axis if a == axis else n_cross for a in range(3))
    sp = (spacing,) * 3
    center = np.array([(d - 1) / 2.0 * spacing for d in dims])
    if direction is None:
        u = np.zeros(3)
        u[axis] = 1.0
        center[axis] = 0.0  # irrelevant along the axis; keeps endpoints tidy
    else:
        u = np.asarray(direction, dtype=np.float64)
        u = u / np.linalg.norm(u)
        # run through the central voxel; requires odd dims on moving axes
        center = np.array([(d // 2) * spacing for d in dims])
    reach = float(np.sum(np.asarray(dims) * spacing))  # beyond any corner
    p0, p1 = center - reach * u, center + reach * u
    intensity, mask = _capsules(dims, sp, [(p0, p1, radius_mm)], contrast)
    intensity = _add_noise(intensity, noise_sigma, seed)
    meta = {
        "kind": "tube",
        "radius_mm": radius_mm,
        "length_mm": n_axis * spacing if direction is None else None,
        "direction": [float(x) for x in u],
        "contrast": contrast,
        "noise_sigma": noise_sigma,
        "seed": seed,
        "analytic_volume_mm3": np.pi * radius_mm**2 * n_axis * spacing
        if direction is None
        else None,
        "junctions": [],
    }
    return Phantom(
        Volume3D(intensity, sp),
        BinaryMask(mask, sp),
        _centerline_voxels(dims, sp, p0, p1),
        meta,
    )


def noisy_tube(
    radius_mm: float = 2.0,
    length_mm: float = 40.0,
    spacing: float = 0.5,
    noise_sigma: float = 0.1,
    seed: int = 0,
    **kwargs,
) -> Phantom:
    """Tube with additive Gaussian noise (the PSNR and robustness fixture)."""
    return tube(
        radius_mm, length_mm, spacing, noise_sigma=noise_sigma, seed=seed, **kwargs
    )


def two_tubes(
    radius1_mm: float = 2.0,
    radius2_mm: float = 8.0,
    length_mm: float = 40.0,
    spacing: float = 0.5,
    gap_mm: float = 10.0,
    margin_mm: float = 6.0,
    contrast: float = 1.0,
) -> Phantom:
    """Two parallel disjoint tubes of different radii along x, offset in y."""
    _check_radius(radius1_mm)
    _check_radius(radius2_mm)
    nx = int(round(length_mm / spacing))
    y1 = margin_mm + radius1_mm
    y2 = y1 + radius1_mm + gap_mm + radius2_mm
    ny = int(round((y2 + radius2_mm + margin_mm) / spacing)) + 1
    rmax = max(radius1_mm, radius2_mm)
    nz = 2 * int(round((rmax + margin_mm) / spacing)) + 1
    dims = (nx, ny, nz)
    sp = (spacing,) * 3
    zc = (nz // 2) * spacing
    y1 = round(y1 / spacing) * spacing  # centerlines on voxel centers
    y2 = round(y2 / spacing) * spacing
    reach = nx * spacing + 10.0
    segs = [
        ((-reach, y1, zc), (reach, y1, zc), radius1_mm),
        ((-reach, y2, zc), (reach, y2, zc), radius2_mm),
    ]
    intensity, mask = _capsules(dims, sp, segs, contrast)
    tubes, lines = [], []
    for (p0, p1, r) in segs:
        grids = _grids_mm(dims, sp)
        sub = (_segment_dist_sq(grids, p0, p1) <= r**2).astype(np.uint8)
        line = _centerline_voxels(dims, sp, p0, p1)
        tubes.append({"radius_mm": r, "mask": sub, "centerline": line})
        lines.append(line)
    if (tubes[0]["mask"] & tubes[1]["mask"]).any():
        raise ValueError("tubes overlap; increase gap_mm")
    meta = {"kind": "two-tubes", "tubes": tubes, "junctions": []}
    return Phantom(
        Volume3D(intensity, sp), BinaryMask(mask, sp), np.vstack(lines), meta
    )


def y_junction(
    trunk_radius_mm: float = 4.0,
    twig_radius_mm: float = 1.0,
    size: int = 160,
    spacing: float = 0.5,
    contrast: float = 1.0,
) -> Phantom:
    """Y-shaped vessel: a thick trunk that splits into two thin twigs.

    The trunk enters through the x = 0 face and ends at the volume center,
    where both twigs leave at 45 degrees in the x-y plane and run out through
    the far faces. Exactly one junction by construction.
    """
    _check_radius(trunk_radius_mm)
    _check_radius(twig_radius_mm)
    dims = (size, size, size)
    sp = (spacing,) * 3
    j_idx = (size // 2, size // 2, size // 2)
    j = np.array([i * spacing for i in j_idx])
    reach = size * spacing * 2.0
    d_plus = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    d_minus = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    segs = [
        ((-reach, j[1], j[2]), tuple(j), trunk_radius_mm),
        (tuple(j), tuple(j + reach * d_plus), twig_radius_mm),
        (tuple(j), tuple(j + reach * d_minus), twig_radius_mm),
    ]
    intensity, mask = _capsules(dims, sp, segs, contrast)
    lines = [_centerline_voxels(dims, sp, p0, p1) for p0, p1, _ in segs]
    meta = {
        "kind": "y",
        "trunk_radius_mm": trunk_radius_mm,
        "twig_radius_mm": twig_radius_mm,
        "junctions": [{"voxel": list(j_idx), "mm": [float(x) for x in j]}],
        "branch_radii_mm": [trunk_radius_mm, twig_radius_mm, twig_radius_mm],
        "branch_centerlines": lines,
    }
    return Phantom(
        Volume3D(intensity, sp), BinaryMask(mask, sp), np.vstack(lines), meta
    )


def blob(
    radius_mm: float = 2.0,
    spacing: float = 1.0,
    dims=(41, 41, 41),
    contrast: float = 1.0,
) -> Phantom:
    """Gaussian ball: the isotropic structure tubularity filters must reject."""
    _check_radius(radius_mm)
    sp = (spacing,) * 3
    center = np.array([(d // 2) * spacing for d in dims])
    grids = _grids_mm(dims, sp)
    dist_sq = sum((g - c) ** 2 for g, c in zip(grids, center))
    intensity = contrast * np.exp(-dist_sq / (2.0 * radius_mm**2))
    mask = (dist_sq <= radius_mm**2).astype(np.uint8)
    ci = tuple(int(d // 2) for d in dims)
    meta = {"kind": "blob", "radius_mm": radius_mm, "center_voxel": list(ci)}
    return Phantom(
        Volume3D(intensity, sp),
        BinaryMask(mask, sp),
        np.array([ci], dtype=np.int64),
        meta,
    )


def plate(
    half_thickness_mm: float = 2.0,
    spacing: float = 1.0,
    dims=(41, 41, 41),
    normal_axis: int = 2,
    contrast: float = 1.0,
) -> Phantom:
    """Gaussian slab: the planar structure tubularity filters must reject."""
    _check_radius(half_thickness_mm)
    sp = (spacing,) * 3
    c = (dims[normal_axis] // 2) * spacing
    grids = _grids_mm(dims, sp)
    off = grids[normal_axis] - c
    intensity = (contrast * np.exp(-(off**2) / (2.0 * half_thickness_mm**2))) * np.ones(
        dims
    )
    mask = ((off**2 <= half_thickness_mm**2) * np.ones(dims)).astype(np.uint8)
    mid = [int(d // 2) for d in dims]
    meta = {
        "kind": "plate",
        "half_thickness_mm": half_thickness_mm,
        "normal_axis": normal_axis,
    }
    return Phantom(
        Volume3D(intensity, sp),
        BinaryMask(mask, sp),
        np.array([mid], dtype=np.int64),
        meta,
    )
