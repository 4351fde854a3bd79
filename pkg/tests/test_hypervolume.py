import numpy as np
import pytest

from vesselkit import BinaryMask, Volume3D, phantoms
from vesselkit.hypervolume import (
    CHANNEL_NAMES,
    build_hypervolume,
    enhanced_channel,
    psnr_gain_report,
)
from vesselkit.vesselness import FilterParams


@pytest.fixture(scope="module")
def small_hyper():
    ph = phantoms.noisy_tube(radius_mm=2.0, length_mm=20.0, spacing=1.0,
                             noise_sigma=0.1, seed=0, cross_half_mm=6.0)
    return ph, build_hypervolume(ph.volume)


def test_channel_contract(small_hyper):
    _, hv = small_hyper
    assert tuple(hv.channel_names) == CHANNEL_NAMES
    assert CHANNEL_NAMES == (
        "Original", "Frangi", "Jerman", "Sato", "Zhang", "Meijering", "RORPO",
    )
    assert len(hv.channels) == 7


def test_original_channel_is_zscored_over_body(small_hyper):
    ph, hv = small_hyper
    meta = hv.meta["standardization"]
    assert meta["method"] == "z-score"
    body = ph.volume.data != 0
    mean = float(ph.volume.data[body].mean())
    std = float(ph.volume.data[body].std())
    assert meta["mean"] == pytest.approx(mean, rel=1e-5)
    assert meta["std"] == pytest.approx(std, rel=1e-5)
    assert meta["body_voxels"] == int(body.sum())
    expect = (ph.volume.data - mean) / std
    np.testing.assert_allclose(hv.channels[0].data, expect, atol=1e-4)


def test_filter_channels_normalized(small_hyper):
    _, hv = small_hyper
    for name, ch in zip(hv.channel_names[1:], hv.channels[1:]):
        assert ch.data.min() >= 0.0, name
        assert ch.data.max() == pytest.approx(1.0), name


def test_constant_volume_standardizes_with_unit_divisor():
    vol = Volume3D(np.full((8, 8, 8), 3.0, np.float32), (1, 1, 1))
    hv = build_hypervolume(vol, FilterParams(scales=(1.0,), rorpo_lengths=(4,)))
    meta = hv.meta["standardization"]
    # the recorded std is the divisor actually used, so the transform stays
    # invertible even for a flat body
    assert meta["std"] == 1.0
    np.testing.assert_allclose(hv.channels[0].data, 0.0, atol=1e-7)


def test_enhanced_channel_is_voxelwise_max(small_hyper):
    _, hv = small_hyper
    enh = enhanced_channel(hv)
    stack = np.stack([np.asarray(c.data, dtype=np.float64) for c in hv.channels[1:]])
    np.testing.assert_allclose(enh.data, stack.max(axis=0), atol=1e-6)


def test_enhanced_channel_rejects_foreign_stack(small_hyper):
    from vesselkit import HyperVolume

    _, hv = small_hyper
    wrong = HyperVolume(list(hv.channels), [f"c{i}" for i in range(7)])
    with pytest.raises(ValueError):
        enhanced_channel(wrong)


def test_filter_failure_names_the_channel(monkeypatch):
    import vesselkit.hypervolume as hvmod

    def boom(vol, fid, p):
        if fid == "sato":
            raise ValueError("synthetic failure")
        return vol.with_data(np.zeros(vol.dims))

    monkeypatch.setattr(hvmod, "multiscale", boom)
    vol = Volume3D(np.random.default_rng(0).random((8, 8, 8)).astype(np.float32), (1, 1, 1))
    with pytest.raises(RuntimeError, match="Sato"):
        build_hypervolume(vol, FilterParams(scales=(1.0,), rorpo_lengths=(4,)))


def test_anisotropic_input_warns():
    vol = Volume3D(np.zeros((8, 8, 8), np.float32), (1.0, 1.0, 2.0))
    with pytest.warns(UserWarning, match="anisotropic"):
        build_hypervolume(vol, FilterParams(scales=(2.0,), rorpo_lengths=(4,)))


def test_psnr_gain_on_noisy_tube(small_hyper):
    # the Frangi channel is the denoising workhorse; the fused maximum keeps
    # the strongest response per voxel and so inherits the noisiest background
    ph, hv = small_hyper
    frangi = hv.channels[list(hv.channel_names).index("Frangi")]
    before, after = psnr_gain_report(ph.volume, frangi, ph.mask)
    assert after > before + 3.0


def test_psnr_gain_geometry_mismatch():
    a = Volume3D(np.ones((6, 6, 6), np.float32), (1, 1, 1))
    b = Volume3D(np.ones((6, 6, 6), np.float32), (2, 2, 2))
    gt = BinaryMask(np.ones((6, 6, 6), np.uint8), (1, 1, 1))
    with pytest.raises(ValueError):
        psnr_gain_report(a, b, gt)
