"""Vessel-size partition masks and bifurcation regions.

Branches are classified by their size (diameter, mm) into small / medium /
large intervals; each class's skeleton voxels are dilated back out to a
mask with a per-voxel ball whose radius is the local distance-transform
value plus one voxel pitch, then clipped to the ground truth.  The margin
plus a nearest-branch fill of any remaining voxels guarantees that the
class masks jointly cover every ground-truth foreground voxel while never
extending outside it.

Dataset presets:

* ircad:   small [0,3], medium ]3,6], large ]6,+inf[  (mm)
* bullitt: small [0,0.513], medium ]0.513,+inf[, no large class

Reports echo the interval notation strings exactly as defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from .skeleton import VesselGraph
from .volume import BinaryMask

__all__ = [
    "SizeIntervals",
    "PartitionMasks",
    "preset_intervals",
    "classify_branches",
    "build_class_masks",
    "bifurcation_mask",
]

CLASS_NAMES = ("small", "medium", "large")

_PRESET_NOTATION = {
    "ircad": {"small": "[0,3]", "medium": "]3,6]", "large": "]6,+∞["},
    "bullitt": {"small": "[0,0.513]", "medium": "]0.513, +∞[", "large": "∅"},
}


@dataclass(frozen=True)
class SizeIntervals:
    """Disjoint size intervals covering [0, inf).

    ``small`` is the closed interval [0, small_max]; ``medium`` is
    ]small_max, medium_max]; ``large`` is ]medium_max, inf[.  An infinite
    ``medium_max`` means the large class is empty (the Bullitt convention).
    """

    small_max: float
    medium_max: float
    preset: str | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.small_max < self.medium_max):
            raise ValueError(
                f"need 0 < small_max < medium_max, got {self.small_max}, {self.medium_max}"
            )

    @property
    def class_names(self) -> tuple[str, ...]:
        if math.isinf(self.medium_max):
            return CLASS_NAMES[:2]
        return CLASS_NAMES

    def classify(self, size_mm: float) -> str:
        if size_mm <= self.small_max:
            return "small"
        if size_mm <= self.medium_max:
            return "medium"
        return "large"

    def notation(self) -> dict[str, str]:
        """Interval strings per class, echoed verbatim into reports."""
        if self.preset in _PRESET_NOTATION:
            return dict(_PRESET_NOTATION[self.preset])
        a = f"{self.small_max:g}"
        b = f"{self.medium_max:g}"
        out = {"small": f"[0,{a}]"}
        if math.isinf(self.medium_max):
            out["medium"] = f"]{a}, +∞["
            out["large"] = "∅"
        else:
            out["medium"] = f"]{a},{b}]"
            out["large"] = f"]{b},+∞["
        return out


def preset_intervals(name: str) -> SizeIntervals:
    if name == "ircad":
        return SizeIntervals(3.0, 6.0, preset="ircad")
    if name == "bullitt":
        return SizeIntervals(0.513, math.inf, preset="bullitt")
    raise ValueError(f"unknown preset {name!r} (expected 'ircad' or 'bullitt')")


@dataclass
class PartitionMasks:
    """Per-class masks plus the bifurcation mask.

    ``masks`` holds one BinaryMask per class name that the intervals
    define (the Bullitt preset has no large mask at all).  Class masks may
    overlap near junctions; each is used independently downstream.
    """

    intervals: SizeIntervals
    masks: dict = field(default_factory=dict)
    m_bif: BinaryMask | None = None

    @property
    def small(self) -> BinaryMask | None:
        return self.masks.get("small")

    @property
    def medium(self) -> BinaryMask | None:
        return self.masks.get("medium")

    @property
    def large(self) -> BinaryMask | None:
        return self.masks.get("large")


def classify_branches(graph: VesselGraph, intervals: SizeIntervals) -> list[str]:
    """Class name per branch, aligned with ``graph.branches``."""
    return [intervals.classify(b.size_mm) for b in graph.branches]


_ball_cache: dict = {}


def _ball_offsets(radius_mm: float, spacing: tuple[float, float, float]) -> np.ndarray:
    """Integer offsets whose physical distance from the origin is <= radius."""
    key = (round(radius_mm, 9), spacing)
    hit = _ball_cache.get(key)
    if hit is not None:
        return hit
    ext = [int(math.floor(radius_mm / s)) for s in spacing]
    axes = [np.arange(-e, e + 1) for e in ext]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    d2 = (gx * spacing[0]) ** 2 + (gy * spacing[1]) ** 2 + (gz * spacing[2]) ** 2
    keep = d2 <= radius_mm * radius_mm + 1e-9
    offs = np.stack([gx[keep], gy[keep], gz[keep]], axis=1).astype(np.int64)
    if len(_ball_cache) > 4096:
        _ball_cache.clear()
    _ball_cache[key] = offs
    return offs


def _stamp_balls(
    out: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    spacing: tuple[float, float, float],
) -> None:
    dims = np.asarray(out.shape)
    for c, r in zip(centers, radii):
        offs = _ball_offsets(float(r), spacing)
        pts = c + offs
        ok = ((pts >= 0) & (pts < dims)).all(axis=1)
        out[tuple(pts[ok].T)] = True


def build_class_masks(
    graph: VesselGraph,
    classes: list[str],
    gt: BinaryMask,
    intervals: SizeIntervals,
) -> PartitionMasks:
    """Reconstruct per-class masks from classified branches.

    Dilation radius at each skeleton voxel is its own distance-transform
    value plus one voxel pitch; the union per class is intersected with
    ``gt``.  Ground-truth voxels missed by every ball (junction bodies,
    discretization slivers) are assigned to the class of their nearest
    branch voxel, so the class masks always cover the foreground exactly.
    """
    if len(classes) != len(graph.branches):
        raise ValueError(f"{len(classes)} classes for {len(graph.branches)} branches")
    bad = set(classes) - set(intervals.class_names)
    if bad:
        raise ValueError(f"unknown class names: {sorted(bad)}")
    if (np.asarray(graph.skeleton_voxels).max(axis=0) >= np.asarray(gt.dims)).any():
        raise ValueError("graph voxels outside ground-truth volume")
    if not np.allclose(graph.spacing, gt.spacing):
        raise ValueError("graph and ground-truth spacing differ")

    pitch = max(gt.spacing)
    gtb = gt.bool_data
    names = intervals.class_names
    union = {name: np.zeros(gt.dims, bool) for name in names}
    seed_code = np.zeros(gt.dims, np.int64)
    code_of = {name: i + 1 for i, name in enumerate(names)}

    for branch, cls in zip(graph.branches, classes):
        centers = graph.skeleton_voxels[branch.voxels]
        radii = graph.dt_mm[branch.voxels] + pitch
        _stamp_balls(union[cls], centers, radii, gt.spacing)
        seed_code[tuple(centers.T)] = code_of[cls]

    covered = np.zeros(gt.dims, bool)
    for name in names:
        union[name] &= gtb
        covered |= union[name]

    missing = gtb & ~covered
    if missing.any():
        if not seed_code.any():
            raise ValueError("graph has no branch voxels to assign coverage gaps to")
        _, idx = ndi.distance_transform_edt(
            seed_code == 0, sampling=gt.spacing, return_indices=True
        )
        nearest = seed_code[tuple(idx[:, missing])]
        where = np.nonzero(missing)
        for name in names:
            sel = nearest == code_of[name]
            if sel.any():
                union[name][where[0][sel], where[1][sel], where[2][sel]] = True

    masks = {
        name: BinaryMask(union[name], gt.spacing, gt.origin) for name in names
    }
    return PartitionMasks(intervals=intervals, masks=masks)


def bifurcation_mask(
    graph: VesselGraph, gt: BinaryMask, radius_mm: float | None = None
) -> BinaryMask:
    """Ball dilation of the bifurcation voxels, clipped to the ground truth.

    ``radius_mm`` of None uses twice the local vessel diameter at each
    junction (4 * dt at its center voxel); 0 keeps exactly the junction
    voxels themselves.  Empty when the graph has no bifurcations.
    """
    if radius_mm is not None and radius_mm < 0:
        raise ValueError("radius_mm must be >= 0")
    out = np.zeros(gt.dims, bool)
    for b in graph.bifurcations:
        r = 4.0 * b.radius_mm if radius_mm is None else float(radius_mm)
        centers = graph.skeleton_voxels[b.voxels]
        _stamp_balls(out, centers, np.full(centers.shape[0], r), gt.spacing)
    out &= gt.bool_data
    return BinaryMask(out, gt.spacing, gt.origin)
