import numpy as np
import pytest

from vesselkit import Volume3D, phantoms
from vesselkit.rorpo import ORIENTATIONS, path_opening, rorpo_response
from vesselkit.vesselness import FilterParams


def test_seven_orientation_families():
    assert len(ORIENTATIONS) == 7
    # three near-axis cones of 9 steps, four diagonal cones of 4 steps
    sizes = sorted(len(f) for f in ORIENTATIONS)
    assert sizes == [4, 4, 4, 4, 9, 9, 9]


def test_binary_line_kept_iff_long_enough():
    data = np.zeros((20, 9, 9))
    data[3:15, 4, 4] = 1.0  # 12-voxel straight run along x
    kept = path_opening(data, 0, 12, [1.0])
    assert kept[3:15, 4, 4].min() == 1.0
    gone = path_opening(data, 0, 13, [1.0])
    assert gone.max() == 0.0


def test_line_responds_only_in_matching_family():
    data = np.zeros((16, 9, 9))
    data[2:14, 4, 4] = 1.0
    along_y = path_opening(data, 1, 12, [1.0])
    assert along_y.max() == 0.0


def test_diagonal_line_kept_by_diagonal_family():
    n = 16
    data = np.zeros((n, n, n))
    for i in range(2, 14):
        data[i, i, i] = 1.0
    kept = path_opening(data, 3, 12, [1.0])
    assert kept[5, 5, 5] == 1.0
    # the same run is also visible to near-axis cones that include (1,1,1)
    gone = path_opening(data, 4, 4, [1.0])
    assert gone.max() == 0.0  # family 4 steps cannot follow (1,1,1)


def test_path_opening_grayscale_monotone():
    rng = np.random.default_rng(0)
    data = rng.random((12, 10, 10))
    opened = path_opening(data, 0, 6, np.linspace(0.01, 1.0, 64))
    assert np.all(opened <= data + 1e-12)


def test_rorpo_tube_vs_blob():
    ph = phantoms.tube(radius_mm=2.0, length_mm=30.0, spacing=1.0, cross_half_mm=7.0)
    p = FilterParams(rorpo_lengths=(7, 10, 14))
    out = rorpo_response(ph.volume, p)
    cl = np.array([out.data[tuple(v)] for v in ph.centerline])
    assert cl.mean() > 0.5 * out.data.max()

    blob = phantoms.blob(radius_mm=4.0, spacing=1.0)
    out_b = rorpo_response(blob.volume, p)
    # an isotropic blob shows up in every orientation, so top minus fourth is small
    assert out_b.data.max() < 0.2 * out.data.max()


def test_rorpo_length_exceeding_volume_rejected():
    vol = Volume3D(np.zeros((8, 8, 8), np.float32), (1, 1, 1))
    with pytest.raises(ValueError, match="path length"):
        rorpo_response(vol, FilterParams(rorpo_lengths=(16,)))


def test_rorpo_constant_volume_is_zero():
    vol = Volume3D(np.full((10, 10, 10), 2.0, np.float32), (1, 1, 1))
    out = rorpo_response(vol, FilterParams(rorpo_lengths=(5,)))
    assert np.all(out.data == 0.0)


def test_rorpo_deterministic():
    ph = phantoms.noisy_tube(radius_mm=2.0, length_mm=20.0, spacing=1.0,
                             noise_sigma=0.1, seed=1, cross_half_mm=6.0)
    p = FilterParams(rorpo_lengths=(7, 10))
    a = rorpo_response(ph.volume, p)
    b = rorpo_response(ph.volume, p)
    np.testing.assert_array_equal(a.data, b.data)


def test_rorpo_dark_polarity():
    ph = phantoms.tube(radius_mm=2.0, length_mm=20.0, spacing=1.0, cross_half_mm=6.0)
    dark = ph.volume.with_data(ph.volume.data.max() - ph.volume.data)
    p = FilterParams(rorpo_lengths=(7, 10), polarity="dark-on-bright")
    out = rorpo_response(dark, p)
    ref = rorpo_response(ph.volume, FilterParams(rorpo_lengths=(7, 10)))
    np.testing.assert_allclose(out.data, ref.data, atol=1e-6)
