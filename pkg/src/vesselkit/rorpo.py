"""RORPO: ranking the orientation responses of path operators.

A path opening keeps a voxel only if it lies on a path of at least L voxels
whose steps all follow one orientation family. Tubes of diameter smaller
than L light up in exactly one of the seven canonical 3D orientation
families; blobs and plates light up in several. Ranking the seven responses
per voxel and subtracting the fourth-largest from the largest therefore
yields a morphological tubularity measure with no derivatives involved.

Orientation families (step sets forming a DAG along a principal direction):

* three axis families: steps (1, i, j) for i, j in {-1, 0, 1} around axis x,
  and the analogous sets around y and z (nine steps each);
* four diagonal families, one per main diagonal d = (s1, s2, s3) with
  s1 s2 s3 = +-1: steps {d, (s1, s2, 0), (s1, 0, s3), (0, s2, s3)}.

The diagonal step sets deliberately exclude single-axis moves: with them, an
axis-aligned tube would satisfy five families at once and the rank filter
would erase it.

Grayscale path openings are computed by threshold decomposition: binary
openings at increasing levels, each voxel keeping the highest level at which
it survives. Openings are increasing operators, so survivors at one level are
a subset of survivors at lower levels; the binary kernel exploits that by
only scanning voxels still alive. Levels are the distinct intensities when
few, otherwise an evenly spaced quantization (quantization is the standard
approximation; the level count is an explicit argument).
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy import ndimage

from .vesselness import FilterParams
from .volume import Volume3D

__all__ = ["ORIENTATIONS", "path_opening", "rorpo_response"]


def _axis_family(axis):
    steps = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            step = [0, 0, 0]
            step[axis] = 1
            step[(axis + 1) % 3] = i
            step[(axis + 2) % 3] = j
            steps.append(tuple(step))
    return tuple(steps)


def _diagonal_family(s1, s2, s3):
    return ((s1, s2, s3), (s1, s2, 0), (s1, 0, s3), (0, s2, s3))


ORIENTATIONS = (
    _axis_family(0),
    _axis_family(1),
    _axis_family(2),
    _diagonal_family(1, 1, 1),
    _diagonal_family(1, 1, -1),
    _diagonal_family(1, -1, 1),
    _diagonal_family(-1, 1, 1),
)


@njit(cache=True)
def _dag_lengths(fg, steps, ax_dir, forward):
    """Longest path length ending (forward) or starting (backward) at each
    foreground voxel, stepping only within fg. ``ax_dir`` gives the scan
    direction per axis; the backward pass scans reversed with negated steps."""
    nx, ny, nz = fg.shape
    ln = np.zeros(fg.shape, dtype=np.int32)
    xs = (0, nx, 1) if (ax_dir[0] >= 0) == forward else (nx - 1, -1, -1)
    ys = (0, ny, 1) if (ax_dir[1] >= 0) == forward else (ny - 1, -1, -1)
    zs = (0, nz, 1) if (ax_dir[2] >= 0) == forward else (nz - 1, -1, -1)
    sgn = 1 if forward else -1
    for x in range(xs[0], xs[1], xs[2]):
        for y in range(ys[0], ys[1], ys[2]):
            for z in range(zs[0], zs[1], zs[2]):
                if not fg[x, y, z]:
                    continue
                best = 0
                for k in range(steps.shape[0]):
                    px = x - sgn * steps[k, 0]
                    py = y - sgn * steps[k, 1]
                    pz = z - sgn * steps[k, 2]
                    if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz and fg[px, py, pz]:
                        if ln[px, py, pz] > best:
                            best = ln[px, py, pz]
                ln[x, y, z] = best + 1
    return ln


@njit(cache=True)
def _binary_path_open(fg, steps, ax_dir, min_len):
    fwd = _dag_lengths(fg, steps, ax_dir, True)
    bwd = _dag_lengths(fg, steps, ax_dir, False)
    return (fwd + bwd - 1) >= min_len


def _family_dir(steps):
    arr = np.asarray(steps)
    return np.sign(arr.sum(axis=0)).astype(np.int64)


def path_opening(data: np.ndarray, family_index: int, length: int, levels) -> np.ndarray:
    """Grayscale path opening of ``data`` along one orientation family."""
    steps = np.asarray(ORIENTATIONS[family_index], dtype=np.int64)
    ax_dir = _family_dir(steps)
    opened = np.full(data.shape, data.min(), dtype=np.float64)
    alive = np.ones(data.shape, dtype=np.bool_)
    for t in levels:
        fg = alive & (data >= t)
        if not fg.any():
            break
        kept = _binary_path_open(fg, steps, ax_dir, length)
        opened[kept] = t
        alive = kept
    return opened


def _levels(data: np.ndarray, n_levels: int) -> np.ndarray:
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return np.empty(0)
    uniq = np.unique(data)
    if uniq.size <= n_levels:
        return uniq[1:]  # opening at the minimum keeps everything
    return lo + np.arange(1, n_levels + 1) * (hi - lo) / n_levels


def _ball(radius_voxels: int) -> np.ndarray:
    r = int(radius_voxels)
    ax = np.arange(-r, r + 1)
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    return (x**2 + y**2 + z**2) <= r**2


def rorpo_response(
    vol: Volume3D, p: FilterParams, n_levels: int = 128
) -> Volume3D:
    """Top-minus-fourth-ranked orientation response, maxed over path lengths.

    Bright-on-dark is assumed; the dark polarity flag flips the volume around
    its maximum first. ``rorpo_dilation`` > 0 pre-dilates with a voxel ball of
    that radius to bridge small gaps before the openings run.
    """
    data = vol.data.astype(np.float64)
    if p.polarity == "dark-on-bright":
        data = data.max() - data
    if max(p.rorpo_lengths) > max(vol.dims):
        raise ValueError(
            f"max path length {max(p.rorpo_lengths)} exceeds largest volume "
            f"dimension {max(vol.dims)}"
        )
    if p.rorpo_dilation > 0:
        data = ndimage.grey_dilation(data, footprint=_ball(p.rorpo_dilation))
    levels = _levels(data, n_levels)
    best = np.zeros(vol.dims, dtype=np.float64)
    if levels.size:
        for length in p.rorpo_lengths:
            opened = np.stack(
                [path_opening(data, f, length, levels) for f in range(len(ORIENTATIONS))]
            )
            opened.sort(axis=0)  # ascending: [-1] largest, [-4] fourth largest
            np.maximum(best, opened[-1] - opened[-4], out=best)
    return vol.with_data(best)
