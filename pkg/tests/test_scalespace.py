import numpy as np
import pytest
import scipy.ndimage as ndi

from vesselkit import Volume3D
from vesselkit.scalespace import eig_field, eig_sym3, gaussian_smooth, hessian_at_scale


def _random_sym(rng, n):
    a = rng.normal(size=(n, 3, 3))
    return 0.5 * (a + a.transpose(0, 2, 1))


def _field_from_mats(mats):
    from vesselkit.scalespace import SymMat3Field

    return SymMat3Field(
        hxx=mats[:, 0, 0].copy(), hyy=mats[:, 1, 1].copy(), hzz=mats[:, 2, 2].copy(),
        hxy=mats[:, 0, 1].copy(), hxz=mats[:, 0, 2].copy(), hyz=mats[:, 1, 2].copy(),
        sigma_mm=1.0, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
    )


def test_eig_sym3_diagonal():
    t = eig_sym3(np.diag([2.0, 1.0, 3.0]))
    assert (t.l1, t.l2, t.l3) == pytest.approx((1.0, 2.0, 3.0))


def test_eig_sym3_known_spectrum_rotated():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    target = np.array([-5.0, 0.5, 2.0])
    m = q @ np.diag(target) @ q.T
    t = eig_sym3(m)
    # magnitude order: |0.5| <= |2| <= |-5|
    assert t.l1 == pytest.approx(0.5, abs=1e-12)
    assert t.l2 == pytest.approx(2.0, abs=1e-12)
    assert t.l3 == pytest.approx(-5.0, abs=1e-12)


def test_eig_field_matches_eigvalsh_randomized():
    rng = np.random.default_rng(1)
    mats = _random_sym(rng, 500)
    l1, l2, l3 = eig_field(_field_from_mats(mats))
    ours = np.sort(np.stack([l1, l2, l3], axis=1), axis=1)
    ref = np.sort(np.linalg.eigvalsh(mats), axis=1)
    scale = 1.0 + np.abs(ref).max(axis=1, keepdims=True)
    assert np.max(np.abs(ours - ref) / scale) < 1e-9


def test_eig_field_magnitude_order():
    rng = np.random.default_rng(2)
    l1, l2, l3 = eig_field(_field_from_mats(_random_sym(rng, 200)))
    assert np.all(np.abs(l1) <= np.abs(l2) + 1e-12)
    assert np.all(np.abs(l2) <= np.abs(l3) + 1e-12)


def test_eig_degenerate_cases():
    t = eig_sym3(np.zeros((3, 3)))
    assert (t.l1, t.l2, t.l3) == (0.0, 0.0, 0.0)
    t = eig_sym3(np.eye(3) * 4.0)
    assert (t.l1, t.l2, t.l3) == pytest.approx((4.0, 4.0, 4.0))
    # double eigenvalue
    t = eig_sym3(np.diag([7.0, 7.0, 1.0]))
    assert sorted([t.l1, t.l2, t.l3]) == pytest.approx([1.0, 7.0, 7.0])


def test_eig_near_degenerate_stability():
    rng = np.random.default_rng(3)
    base = np.diag([1.0, 1.0 + 1e-13, 1.0 - 1e-13])
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    m = q @ base @ q.T
    t = eig_sym3(0.5 * (m + m.T))
    for v in t:
        assert v == pytest.approx(1.0, abs=1e-9)


def test_eig_sym3_input_validation():
    with pytest.raises(ValueError, match="3x3"):
        eig_sym3(np.zeros((2, 2)))
    with pytest.raises(ValueError, match="symmetric"):
        eig_sym3(np.array([[0.0, 1.0, 0], [0, 0, 0], [0, 0, 0]]))
    bad = np.eye(3)
    bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        eig_sym3(bad)


def test_gaussian_smooth_matches_scipy_in_voxel_units():
    rng = np.random.default_rng(4)
    data = rng.normal(size=(16, 14, 12)).astype(np.float32)
    vol = Volume3D(data, (0.5, 1.0, 2.0))
    out = gaussian_smooth(vol, 2.0)
    ref = ndi.gaussian_filter(data.astype(np.float64), (4.0, 2.0, 1.0), mode="nearest", truncate=6.0)
    np.testing.assert_allclose(out.data, ref, atol=1e-10)


def test_gaussian_smooth_preserves_mean_of_constant():
    vol = Volume3D(np.full((10, 10, 10), 3.25, np.float32), (1, 1, 1))
    out = gaussian_smooth(vol, 1.5)
    np.testing.assert_allclose(out.data, 3.25, rtol=1e-10)


def test_gaussian_smooth_rejects_bad_sigma():
    vol = Volume3D(np.zeros((4, 4, 4), np.float32), (1, 1, 1))
    for s in (0.0, -1.0, np.nan):
        with pytest.raises(ValueError):
            gaussian_smooth(vol, s)


def test_hessian_gaussian_blob_analytic():
    # blob exp(-r^2 / 2 a^2) smoothed by sigma has an analytic center Hessian:
    # value (a^2/(a^2+s^2))^{3/2}, d2/dx2 = -value/(a^2+s^2); normalization
    # multiplies by s^2
    a, s = 3.0, 2.0
    n = 49
    c = n // 2
    idx = np.arange(n) - c
    xx, yy, zz = np.meshgrid(idx, idx, idx, indexing="ij")
    blob = np.exp(-(xx**2 + yy**2 + zz**2) / (2 * a**2)).astype(np.float32)
    vol = Volume3D(blob, (1.0, 1.0, 1.0))
    f = hessian_at_scale(vol, s)
    v = (a**2 / (a**2 + s**2)) ** 1.5
    want = -(s**2) * v / (a**2 + s**2)
    got = f.hxx[c, c, c]
    assert got == pytest.approx(want, rel=1e-3)
    assert f.hyy[c, c, c] == pytest.approx(want, rel=1e-3)
    assert f.hzz[c, c, c] == pytest.approx(want, rel=1e-3)
    # mixed second derivatives vanish at the center by symmetry
    assert abs(f.hxy[c, c, c]) < 1e-6
    assert abs(f.hxz[c, c, c]) < 1e-6


def test_hessian_gamma_normalization_scales_with_sigma_squared():
    # on a 1D quadratic ridge the unnormalized second derivative is constant,
    # so the gamma-normalized value must grow like sigma^2
    n = 41
    x = np.arange(n) - n // 2
    ridge = np.tile((-(x**2) / 50.0)[:, None, None], (1, n, n)).astype(np.float32)
    vol = Volume3D(ridge, (1.0, 1.0, 1.0))
    c = n // 2
    h1 = hessian_at_scale(vol, 1.5).hxx[c, c, c]
    h2 = hessian_at_scale(vol, 3.0).hxx[c, c, c]
    assert h2 / h1 == pytest.approx(4.0, rel=1e-3)


def test_hessian_small_sigma_clamped_with_warning():
    vol = Volume3D(np.zeros((8, 8, 8), np.float32), (1.0, 1.0, 1.0))
    with pytest.warns(UserWarning, match="clamp"):
        f = hessian_at_scale(vol, 0.25)
    assert f.sigma_mm == pytest.approx(1.0)


def test_hessian_field_is_symmetric_tensor_per_voxel():
    rng = np.random.default_rng(5)
    vol = Volume3D(rng.normal(size=(12, 12, 12)).astype(np.float32), (1, 1, 1))
    f = hessian_at_scale(vol, 1.5)
    for comp in (f.hxx, f.hyy, f.hzz, f.hxy, f.hxz, f.hyz):
        assert comp.shape == vol.data.shape
        assert np.isfinite(comp).all()
