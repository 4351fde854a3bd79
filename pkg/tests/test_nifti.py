import gzip
import struct

import numpy as np
import pytest

from vesselkit import (
    BinaryMask,
    HyperVolume,
    Volume3D,
    read_hypervolume,
    read_mask,
    read_volume,
    write_hypervolume,
    write_mask,
    write_volume,
)
from vesselkit import nifti


def _rand_volume(rng, shape=(7, 6, 5), spacing=(0.5, 0.75, 1.25), origin=(-3.0, 2.0, 11.5)):
    data = rng.normal(size=shape).astype(np.float32)
    return Volume3D(data, spacing, origin)


def test_header_layout_is_348_bytes():
    assert struct.calcsize("<" + nifti._HDR_FMT) == 348


def test_volume_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    vol = _rand_volume(rng)
    p = tmp_path / "v.nii.gz"
    write_volume(vol, p)
    back = read_volume(p)
    assert back.data.dtype == np.float32
    np.testing.assert_array_equal(back.data, vol.data)
    np.testing.assert_allclose(back.spacing, vol.spacing, rtol=1e-6)
    np.testing.assert_allclose(back.origin, vol.origin, rtol=1e-6)


def test_uncompressed_nii_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    vol = _rand_volume(rng)
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    back = read_volume(p)
    np.testing.assert_array_equal(back.data, vol.data)


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    m = BinaryMask((rng.random((6, 5, 4)) > 0.5).astype(np.uint8), (1, 1, 1))
    p = tmp_path / "m.nii.gz"
    write_mask(m, p)
    back = read_mask(p)
    assert back.data.dtype == np.uint8
    np.testing.assert_array_equal(back.data, m.data)


def test_hypervolume_round_trip_keeps_channel_names(tmp_path):
    rng = np.random.default_rng(3)
    vols = [_rand_volume(rng, shape=(4, 4, 3)) for _ in range(3)]
    hv = HyperVolume(vols, ["alpha", "beta", "gamma"])
    p = tmp_path / "h.nii.gz"
    write_hypervolume(hv, p)
    back = read_hypervolume(p)
    assert list(back.channel_names) == ["alpha", "beta", "gamma"]
    for a, b in zip(back.channels, vols):
        np.testing.assert_array_equal(a.data, b.data)


def test_gzip_output_is_deterministic(tmp_path):
    rng = np.random.default_rng(4)
    vol = _rand_volume(rng)
    p1, p2 = tmp_path / "a.nii.gz", tmp_path / "b.nii.gz"
    write_volume(vol, p1)
    write_volume(vol, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_scl_slope_and_inter_are_applied(tmp_path):
    vol = Volume3D(np.arange(24, dtype=np.float32).reshape(4, 3, 2), (1, 1, 1))
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    raw = bytearray(p.read_bytes())
    # scl_slope and scl_inter live at fixed offsets 112 and 116
    struct.pack_into("<f", raw, 112, 2.0)
    struct.pack_into("<f", raw, 116, -1.0)
    p.write_bytes(bytes(raw))
    back = read_volume(p)
    np.testing.assert_allclose(back.data, vol.data * 2.0 - 1.0, rtol=1e-6)


def test_big_endian_file_is_read(tmp_path):
    rng = np.random.default_rng(5)
    vol = _rand_volume(rng, shape=(5, 4, 3))
    little = tmp_path / "le.nii"
    write_volume(vol, little)
    hdr = nifti._unpack_header(little.read_bytes()[:348], "<")
    flat = []
    for name, code, n in nifti._FIELDS:
        v = hdr[name]
        if code.endswith("s") or code == "c":
            flat.append(v)
        elif n > 1:
            flat.extend(v)
        else:
            flat.append(v)
    big = tmp_path / "be.nii"
    payload = vol.data.astype(">f4").tobytes(order="F")
    big.write_bytes(struct.pack(">" + nifti._HDR_FMT, *flat) + b"\x00" * 4 + payload)
    back = read_volume(big)
    np.testing.assert_array_equal(back.data, vol.data)
    np.testing.assert_allclose(back.spacing, vol.spacing, rtol=1e-6)


def test_vox_offset_is_honored(tmp_path):
    vol = Volume3D(np.ones((2, 2, 2), np.float32), (1, 1, 1))
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    raw = bytearray(p.read_bytes())
    # slide the payload 16 bytes right and bump vox_offset (offset 108) to match
    struct.pack_into("<f", raw, 108, 368.0)
    moved = bytes(raw[:352]) + b"\xee" * 16 + bytes(raw[352:])
    p.write_bytes(moved)
    back = read_volume(p)
    np.testing.assert_array_equal(back.data, vol.data)


def test_read_volume_rejects_multichannel(tmp_path):
    rng = np.random.default_rng(6)
    hv = HyperVolume([_rand_volume(rng, shape=(3, 3, 3)) for _ in range(2)], ["a", "b"])
    p = tmp_path / "h.nii.gz"
    write_hypervolume(hv, p)
    with pytest.raises(ValueError, match="read_hypervolume"):
        read_volume(p)


def test_read_hypervolume_rejects_3d(tmp_path):
    rng = np.random.default_rng(7)
    p = tmp_path / "v.nii.gz"
    write_volume(_rand_volume(rng), p)
    with pytest.raises(ValueError, match="3D"):
        read_hypervolume(p)


def test_read_mask_rejects_nonbinary(tmp_path):
    p = tmp_path / "v.nii.gz"
    write_volume(Volume3D(np.full((3, 3, 3), 0.25, np.float32), (1, 1, 1)), p)
    with pytest.raises(ValueError, match="not binary"):
        read_mask(p)


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_volume(tmp_path / "nope.nii.gz")


def test_truncated_header_raises(tmp_path):
    p = tmp_path / "t.nii"
    p.write_bytes(b"\x00" * 100)
    with pytest.raises(ValueError, match="header"):
        read_volume(p)


def test_bad_magic_raises(tmp_path):
    vol = Volume3D(np.zeros((2, 2, 2), np.float32), (1, 1, 1))
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    raw = bytearray(p.read_bytes())
    raw[344:348] = b"XYZ\x00"
    p.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="NIfTI"):
        read_volume(p)


def test_two_file_magic_rejected(tmp_path):
    vol = Volume3D(np.zeros((2, 2, 2), np.float32), (1, 1, 1))
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    raw = bytearray(p.read_bytes())
    raw[344:348] = b"ni1\x00"
    p.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="two-file"):
        read_volume(p)


def test_truncated_payload_raises(tmp_path):
    rng = np.random.default_rng(8)
    p = tmp_path / "v.nii"
    write_volume(_rand_volume(rng), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-40])
    with pytest.raises(ValueError, match="truncated"):
        read_volume(p)


def test_nonfinite_payload_refused(tmp_path):
    vol = Volume3D(np.zeros((3, 3, 3), np.float32), (1, 1, 1))
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    raw = bytearray(p.read_bytes())
    struct.pack_into("<f", raw, 352, float("nan"))
    p.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="non-finite"):
        read_volume(p)


def test_integer_datatype_read(tmp_path):
    # int16 input with scaling, as scanners commonly produce
    vol = Volume3D(np.ones((3, 2, 2), np.float32), (1, 1, 1))
    p = tmp_path / "v.nii"
    write_volume(vol, p)
    raw = bytearray(p.read_bytes())
    data = (np.arange(12, dtype=np.int16) - 4).reshape(3, 2, 2)
    struct.pack_into("<h", raw, 70, 4)  # datatype = int16
    struct.pack_into("<h", raw, 72, 16)  # bitpix
    p.write_bytes(bytes(raw[:352]) + data.tobytes(order="F"))
    back = read_volume(p)
    np.testing.assert_array_equal(back.data, data.astype(np.float32))


def test_gzip_detected_by_content_not_name(tmp_path):
    rng = np.random.default_rng(9)
    vol = _rand_volume(rng)
    gz = tmp_path / "v.nii.gz"
    write_volume(vol, gz)
    plain_named = tmp_path / "v.nii"
    plain_named.write_bytes(gz.read_bytes())  # gz bytes behind a .nii name
    back = read_volume(plain_named)
    np.testing.assert_array_equal(back.data, vol.data)
