import numpy as np
import pytest
import scipy.ndimage as ndi

from vesselkit import phantoms, skeleton


def betti_numbers(arr) -> tuple[int, int, int]:
    """(b0, b1, b2) of a voxel set under 26-connectivity.

    The set is treated as a union of closed unit cubes, so cubes that share
    only a corner or an edge are connected, matching 26-connectivity.  The
    Euler characteristic chi = V - E + F - C is counted over the covered
    corner lattice via shifted unions; b0 comes from 26-connected labeling,
    b2 counts enclosed background cavities (6-connected), and b1 follows
    from chi = b0 - b1 + b2.
    """
    a = np.asarray(arr).astype(bool)
    if a.ndim != 3:
        raise ValueError("expected a 3D array")
    nx, ny, nz = a.shape

    V = np.zeros((nx + 1, ny + 1, nz + 1), bool)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                V[dx:dx + nx, dy:dy + ny, dz:dz + nz] |= a

    E = 0
    for ax in range(3):
        shape = [n + 1 for n in a.shape]
        shape[ax] = a.shape[ax]
        g = np.zeros(shape, bool)
        for d1 in (0, 1):
            for d2 in (0, 1):
                idx = []
                offs = iter((d1, d2))
                for j in range(3):
                    if j == ax:
                        idx.append(slice(0, a.shape[j]))
                    else:
                        o = next(offs)
                        idx.append(slice(o, o + a.shape[j]))
                g[tuple(idx)] |= a
        E += int(g.sum())

    F = 0
    for ax in range(3):
        shape = list(a.shape)
        shape[ax] += 1
        g = np.zeros(shape, bool)
        for d in (0, 1):
            idx = [slice(None)] * 3
            idx[ax] = slice(d, d + a.shape[ax])
            g[tuple(idx)] |= a
        F += int(g.sum())

    C = int(a.sum())
    chi = int(V.sum()) - E + F - C

    b0 = int(ndi.label(a, structure=np.ones((3, 3, 3)))[1])
    bg = np.pad(~a, 1, constant_values=True)
    lab, nlab = ndi.label(bg)  # 6-connected background
    b2 = nlab - 1 if nlab else 0  # all but the outside component are cavities
    b1 = b0 + b2 - chi
    return b0, b1, b2


@pytest.fixture(scope="session")
def betti():
    return betti_numbers


@pytest.fixture(scope="session")
def tube_half():
    """Straight tube, radius 2 mm at 0.5 mm voxels, along x."""
    return phantoms.tube(radius_mm=2.0, length_mm=40.0, spacing=0.5)


@pytest.fixture(scope="session")
def tube_coarse():
    """Straight tube, radius 2 mm at 1.0 mm voxels (coarse, fast)."""
    return phantoms.tube(radius_mm=2.0, length_mm=40.0, spacing=1.0, cross_half_mm=8.0)


@pytest.fixture(scope="session")
def y_pipeline():
    """Default Y phantom with its distance field, skeleton, and graph."""
    ph = phantoms.y_junction()
    dist = skeleton.distance_transform(ph.mask)
    sk = skeleton.skeletonize(ph.mask, dist)
    graph = skeleton.build_graph(sk, dist)
    return ph, dist, sk, graph
