"""Core volume containers: scalar 3D fields, binary masks, and channel stacks.

Axis convention used throughout the package: ``data[ix, iy, iz]`` with x the
first index and, on disk, the fastest-varying axis (NIfTI natural order).
Spacing and origin are physical millimetres.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Volume3D", "BinaryMask", "HyperVolume", "same_geometry"]


def _as_triple(v, name: str) -> tuple[float, float, float]:
    t = tuple(float(c) for c in v)
    if len(t) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(t)}")
    return t


@dataclass
class Volume3D:
    """Scalar 3D field with per-axis voxel spacing (mm) and world origin (mm).

    ``data`` is a (nx, ny, nz) float array; it is marked read-only after
    construction and instances should be treated as immutable.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"expected 3D data, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        if min(arr.shape) < 1:
            raise ValueError(f"dims must be >= 1, got {arr.shape}")
        n_bad = int(np.size(arr) - np.isfinite(arr).sum())
        if n_bad:
            raise ValueError(f"volume contains {n_bad} non-finite voxels")
        self.spacing = _as_triple(self.spacing, "spacing")
        self.origin = _as_triple(self.origin, "origin")
        if not all(np.isfinite(s) and s > 0 for s in self.spacing):
            raise ValueError(f"spacing must be strictly positive and finite, got {self.spacing}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self.data = arr

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def extent_mm(self) -> tuple[float, float, float]:
        """Physical size dims * spacing per axis."""
        return tuple(d * s for d, s in zip(self.dims, self.spacing))

    def with_data(self, data: np.ndarray) -> "Volume3D":
        """New volume with the same geometry and different voxel values."""
        return Volume3D(data, self.spacing, self.origin)

    @property
    def voxel_volume_mm3(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


@dataclass
class BinaryMask:
    """Binary {0,1} field with Volume3D geometry semantics."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"expected 3D mask, got shape {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        vals = np.unique(arr)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"mask values must be exactly 0 or 1, found {vals[:8]}")
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        self.spacing = _as_triple(self.spacing, "spacing")
        self.origin = _as_triple(self.origin, "origin")
        if not all(np.isfinite(s) and s > 0 for s in self.spacing):
            raise ValueError(f"spacing must be strictly positive and finite, got {self.spacing}")
        arr.flags.writeable = False
        self.data = arr

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def bool_data(self) -> np.ndarray:
        return self.data.astype(bool)

    def with_data(self, data: np.ndarray) -> "BinaryMask":
        return BinaryMask(data, self.spacing, self.origin)

    @property
    def count(self) -> int:
        return int(self.data.sum())

    def as_volume(self) -> Volume3D:
        return Volume3D(self.data.astype(np.float32), self.spacing, self.origin)


def same_geometry(a, b, tol: float = 1e-5) -> bool:
    """True when two volumes/masks share dims, spacing and origin (mm tolerance)."""
    return (
        a.dims == b.dims
        and all(abs(x - y) <= tol for x, y in zip(a.spacing, b.spacing))
        and all(abs(x - y) <= tol for x, y in zip(a.origin, b.origin))
    )


def require_same_geometry(a, b, what: str = "volumes") -> None:
    if not same_geometry(a, b):
        raise ValueError(
            f"geometry mismatch between {what}: "
            f"dims {a.dims} vs {b.dims}, spacing {a.spacing} vs {b.spacing}, "
            f"origin {a.origin} vs {b.origin}"
        )


@dataclass
class HyperVolume:
    """Ordered multi-channel stack of co-registered Volume3D channels.

    Channel 0 is by convention the original scan; the fusion pipeline appends
    the six filter responses in a fixed order (see ``hypervolume.CHANNEL_NAMES``).
    """

    channels: list[Volume3D]
    channel_names: list[str]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValueError("HyperVolume needs at least one channel")
        if len(self.channels) != len(self.channel_names):
            raise ValueError(
                f"{len(self.channels)} channels but {len(self.channel_names)} names"
            )
        ref = self.channels[0]
        for i, ch in enumerate(self.channels[1:], start=1):
            if not same_geometry(ref, ch):
                raise ValueError(
                    f"channel {i} ({self.channel_names[i]!r}) geometry differs from channel 0"
                )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.channels[0].dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.channels[0].spacing

    @property
    def origin(self) -> tuple[float, float, float]:
        return self.channels[0].origin

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def stack(self) -> np.ndarray:
        """(nx, ny, nz, nchan) array view of all channels."""
        return np.stack([c.data for c in self.channels], axis=-1)

    def channel(self, name: str) -> Volume3D:
        try:
            idx = self.channel_names.index(name)
        except ValueError:
            raise KeyError(f"no channel named {name!r}; have {self.channel_names}") from None
        return self.channels[idx]
