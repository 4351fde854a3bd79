import numpy as np
import pytest

from vesselkit import (
    BinaryMask,
    Volume3D,
    finest_isotropic_spacing,
    interpolate_at,
    resample_isotropic,
    resample_mask,
)
from vesselkit.resample import output_dims


def _poly(x, y, z):
    # degree-3 trivariate polynomial: cubic B-splines reproduce it exactly
    return (
        0.3 * x**3 - 0.2 * y**3 + 0.11 * z**3
        + 0.5 * x * y * z - 1.2 * x**2 + 0.7 * y * z
        + 2.0 * x - 3.0 * y + 0.25 * z + 5.0
    )


def _grid_mm(dims, spacing, origin):
    axes = [origin[i] + spacing[i] * np.arange(dims[i]) for i in range(3)]
    return np.meshgrid(*axes, indexing="ij")


def test_output_dims_formula():
    assert output_dims((128, 128, 128), (1.0, 1.0, 1.5), 0.65) == (196, 196, 294)
    assert output_dims((10, 10, 10), (1.0, 1.0, 1.0), 1.0) == (10, 10, 10)
    assert output_dims((5, 4, 3), (2.0, 2.0, 2.0), 1.0) == (9, 7, 5)


def test_finest_isotropic_spacing():
    a = Volume3D(np.zeros((4, 4, 4), np.float32), (1.0, 0.9, 1.5))
    b = Volume3D(np.zeros((4, 4, 4), np.float32), (0.8, 1.0, 1.0))
    assert finest_isotropic_spacing([a, b]) == pytest.approx(0.8)
    assert finest_isotropic_spacing([a]) == pytest.approx(0.9)


def test_polynomial_reproduction_interior():
    dims = (40, 40, 30)
    spacing = (1.0, 1.0, 1.5)
    origin = (-2.0, 1.0, 0.5)
    xx, yy, zz = _grid_mm(dims, spacing, origin)
    vol = Volume3D(_poly(xx, yy, zz).astype(np.float32), spacing, origin)
    out = resample_isotropic(vol, 0.8)
    ox, oy, oz = _grid_mm(out.data.shape, out.spacing, out.origin)
    expect = _poly(ox, oy, oz)
    # judge the interior only: prefilter edge effects decay away from borders
    margin_mm = 10.0
    sel = np.ones(out.data.shape, bool)
    for ax, n in enumerate(out.data.shape):
        k = int(np.ceil(margin_mm / out.spacing[ax]))
        sl = [slice(None)] * 3
        sl[ax] = slice(0, k)
        sel[tuple(sl)] = False
        sl[ax] = slice(n - k, n)
        sel[tuple(sl)] = False
    rng_span = expect.max() - expect.min()
    err = np.abs(out.data.astype(np.float64) - expect)[sel].max() / rng_span
    assert err <= 1e-5


def test_identity_resample_is_near_exact():
    rng = np.random.default_rng(0)
    vol = Volume3D(rng.normal(size=(12, 12, 12)).astype(np.float32), (1.0, 1.0, 1.0))
    out = resample_isotropic(vol, 1.0)
    assert out.data.shape == vol.data.shape
    np.testing.assert_allclose(out.data, vol.data, atol=1e-5)


def test_resample_preserves_origin_and_sets_spacing():
    vol = Volume3D(np.zeros((8, 8, 8), np.float32), (1.0, 1.2, 1.4), (3.0, -1.0, 2.5))
    out = resample_isotropic(vol, 0.9)
    assert out.spacing == (0.9, 0.9, 0.9)
    assert out.origin == vol.origin


def test_resample_mask_is_binary_and_tracks_volume():
    m = np.zeros((20, 20, 20), np.uint8)
    m[5:15, 5:15, 5:15] = 1
    mask = BinaryMask(m, (1.0, 1.0, 1.0))
    out = resample_mask(mask, 0.5)
    assert set(np.unique(out.data)) <= {0, 1}
    # physical volume of the block should be roughly preserved
    v_in = mask.count * 1.0
    v_out = out.count * 0.5**3
    assert abs(v_out - v_in) / v_in < 0.1


def test_interpolate_at_matches_polynomial():
    dims = (24, 24, 24)
    spacing = (1.0, 1.0, 1.0)
    origin = (0.0, 0.0, 0.0)
    xx, yy, zz = _grid_mm(dims, spacing, origin)
    vol = Volume3D(_poly(xx, yy, zz).astype(np.float32), spacing, origin)
    rng = np.random.default_rng(1)
    pts = rng.uniform(8.0, 15.0, size=(50, 3))
    got = interpolate_at(vol, pts)
    expect = _poly(pts[:, 0], pts[:, 1], pts[:, 2])
    span = expect.max() - expect.min()
    assert np.abs(got - expect).max() / span < 1e-5


def test_interpolate_at_grid_points_is_exact():
    rng = np.random.default_rng(2)
    vol = Volume3D(rng.normal(size=(10, 10, 10)).astype(np.float32), (0.7, 0.7, 0.7), (1.0, 2.0, 3.0))
    idx = np.array([[2, 3, 4], [5, 5, 5], [7, 1, 8]])
    pts = np.array(vol.origin) + idx * 0.7
    got = interpolate_at(vol, pts)
    expect = vol.data[tuple(idx.T)]
    np.testing.assert_allclose(got, expect, atol=2e-5)


def test_bad_target_spacing_rejected():
    vol = Volume3D(np.zeros((4, 4, 4), np.float32), (1, 1, 1))
    with pytest.raises(ValueError):
        resample_isotropic(vol, 0.0)
    with pytest.raises(ValueError):
        resample_isotropic(vol, -1.0)
