"""Minimal NIfTI-1 reader/writer: the single boundary where bytes become volumes.

Supports single-file ``.nii`` / ``.nii.gz``, 3D scalar volumes and 4D channel
stacks (channel as the 4th dimension). Header fields honored: ``dim``,
``pixdim``, ``datatype``, ``scl_slope``/``scl_inter``, and the sform/qform
translation (stored origin only; orientation reslicing is out of scope).
On disk, scans and filter responses are 32-bit float, masks 8-bit unsigned.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .volume import BinaryMask, HyperVolume, Volume3D

__all__ = [
    "read_volume",
    "write_volume",
    "read_hypervolume",
    "write_hypervolume",
    "read_mask",
    "write_mask",
]

# (name, struct code, count) in file order; offsets follow the NIfTI-1 standard
_FIELDS = [
    ("sizeof_hdr", "i", 1),
    ("data_type", "10s", 1),
    ("db_name", "18s", 1),
    ("extents", "i", 1),
    ("session_error", "h", 1),
    ("regular", "c", 1),
    ("dim_info", "c", 1),
    ("dim", "h", 8),
    ("intent_p1", "f", 1),
    ("intent_p2", "f", 1),
    ("intent_p3", "f", 1),
    ("intent_code", "h", 1),
    ("datatype", "h", 1),
    ("bitpix", "h", 1),
    ("slice_start", "h", 1),
    ("pixdim", "f", 8),
    ("vox_offset", "f", 1),
    ("scl_slope", "f", 1),
    ("scl_inter", "f", 1),
    ("slice_end", "h", 1),
    ("slice_code", "c", 1),
    ("xyzt_units", "c", 1),
    ("cal_max", "f", 1),
    ("cal_min", "f", 1),
    ("slice_duration", "f", 1),
    ("toffset", "f", 1),
    ("glmax", "i", 1),
    ("glmin", "i", 1),
    ("descrip", "80s", 1),
    ("aux_file", "24s", 1),
    ("qform_code", "h", 1),
    ("sform_code", "h", 1),
    ("quatern_b", "f", 1),
    ("quatern_c", "f", 1),
    ("quatern_d", "f", 1),
    ("qoffset_x", "f", 1),
    ("qoffset_y", "f", 1),
    ("qoffset_z", "f", 1),
    ("srow_x", "f", 4),
    ("srow_y", "f", 4),
    ("srow_z", "f", 4),
    ("intent_name", "16s", 1),
    ("magic", "4s", 1),
]

_HDR_SIZE = 348
_HDR_FMT = "".join(code if n == 1 else f"{n}{code}" for _, code, n in _FIELDS)
assert struct.calcsize("<" + _HDR_FMT) == _HDR_SIZE


def _unpack_header(raw: bytes, byteorder: str) -> dict:
    vals = struct.unpack(byteorder + _HDR_FMT, raw[:_HDR_SIZE])
    out, i = {}, 0
    for name, _, n in _FIELDS:
        out[name] = vals[i] if n == 1 else vals[i : i + n]
        i += n
    return out


def _pack_from_dict(hdr: dict) -> bytes:
    flat = []
    for name, _, n in _FIELDS:
        v = hdr[name]
        flat.extend(v if n > 1 else [v])
    return struct.pack("<" + _HDR_FMT, *flat)


_DTYPE_CODES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}
_CODE_FOR = {np.dtype(np.float32): 16, np.dtype(np.uint8): 2}


def _open_read(path: Path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _open_write(path: Path):
    if str(path).endswith(".gz"):
        # fixed mtime and empty filename keep output byte-identical across runs
        return gzip.GzipFile(filename="", mode="wb", fileobj=open(path, "wb"), mtime=0)
    return open(path, "wb")


def _parse_header(raw: bytes) -> dict:
    if len(raw) < _HDR_SIZE:
        raise ValueError(f"truncated NIfTI header ({len(raw)} bytes)")
    hdr = _unpack_header(raw, "<")
    swapped = False
    if hdr["sizeof_hdr"] != _HDR_SIZE:
        hdr = _unpack_header(raw, ">")
        if hdr["sizeof_hdr"] != _HDR_SIZE:
            raise ValueError("malformed header: sizeof_hdr != 348 in either byte order")
        swapped = True
    if hdr["magic"] == b"ni1\x00":
        raise ValueError("two-file NIfTI (.hdr/.img) is not supported, use single-file .nii")
    if hdr["magic"] != b"n+1\x00":
        raise ValueError(f"not a NIfTI-1 file (magic {hdr['magic']!r})")
    hdr["swapped"] = swapped
    return hdr


def _read_raw(path) -> tuple[np.ndarray, tuple, tuple, int, str]:
    """Read file into (float32 array indexed [x,y,z(,c)], spacing, origin, ndim, descrip)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with _open_read(path) as fh:
        raw = fh.read()
    hdr = _parse_header(raw)
    ndim = hdr["dim"][0]
    if ndim not in (3, 4):
        raise ValueError(f"unsupported dimensionality dim[0]={ndim} (expected 3 or 4)")
    nx, ny, nz = (int(d) for d in hdr["dim"][1:4])
    nc = int(hdr["dim"][4]) if ndim == 4 else 1
    if min(nx, ny, nz) < 1 or nc < 1:
        raise ValueError(f"malformed header: dims {hdr['dim'][1:5]}")
    try:
        dt = np.dtype(_DTYPE_CODES[hdr["datatype"]])
    except KeyError:
        raise ValueError(f"unsupported NIfTI datatype code {hdr['datatype']}") from None
    if hdr["swapped"]:
        dt = dt.newbyteorder(">")
    offset = int(hdr["vox_offset"])
    count = nx * ny * nz * nc
    avail = (len(raw) - offset) // dt.itemsize
    if avail < count:
        raise ValueError(f"truncated data section: expected {count} voxels, got {max(avail, 0)}")
    data = np.frombuffer(raw, dtype=dt, count=count, offset=offset)
    # NIfTI stores x fastest; Fortran-order reshape yields [x,y,z(,c)] indexing
    shape = (nx, ny, nz, nc) if ndim == 4 else (nx, ny, nz)
    arr = np.asarray(data).reshape(shape, order="F").astype(np.float32)
    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    if slope != 0.0 and not (slope == 1.0 and inter == 0.0):
        arr = arr * np.float32(slope) + np.float32(inter)
    spacing = tuple(abs(float(p)) for p in hdr["pixdim"][1:4])
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise ValueError(f"malformed header: non-positive pixdim {spacing}")
    if hdr["sform_code"] > 0:
        origin = (float(hdr["srow_x"][3]), float(hdr["srow_y"][3]), float(hdr["srow_z"][3]))
    elif hdr["qform_code"] > 0:
        origin = (float(hdr["qoffset_x"]), float(hdr["qoffset_y"]), float(hdr["qoffset_z"]))
    else:
        origin = (0.0, 0.0, 0.0)
    n_bad = int(arr.size - np.isfinite(arr).sum())
    if n_bad:
        raise ValueError(f"{path.name}: {n_bad} non-finite voxel(s) after scaling, refusing to load")
    descrip = hdr["descrip"].split(b"\x00", 1)[0].decode("ascii", "replace")
    return arr, spacing, origin, ndim, descrip


def read_volume(path) -> Volume3D:
    """Load a single-channel NIfTI volume.

    4D files with more than one channel are rejected (use ``read_hypervolume``);
    a singleton 4th dimension is squeezed.
    """
    arr, spacing, origin, ndim, _ = _read_raw(path)
    if ndim == 4:
        if arr.shape[3] != 1:
            raise ValueError(
                f"{Path(path).name} is a {arr.shape[3]}-channel 4D volume; use read_hypervolume"
            )
        arr = arr[..., 0]
    return Volume3D(arr, spacing, origin)


def read_hypervolume(path) -> HyperVolume:
    """Load a 4D NIfTI as an ordered channel stack (channel = 4th dimension)."""
    arr, spacing, origin, ndim, descrip = _read_raw(path)
    if ndim != 4:
        raise ValueError(f"{Path(path).name} is 3D, not a 4D channel stack")
    nc = arr.shape[3]
    channels = [Volume3D(arr[..., c], spacing, origin) for c in range(nc)]
    names = [f"channel{c}" for c in range(nc)]
    # channel names ride along in descrip as a comma-separated list
    parts = descrip.split(",")
    if len(parts) == nc and all(parts):
        names = parts
    return HyperVolume(channels, names)


def read_mask(path) -> BinaryMask:
    """Load a binary mask; values must be exactly 0 or 1 after scaling."""
    arr, spacing, origin, ndim, _ = _read_raw(path)
    if ndim == 4:
        if arr.shape[3] != 1:
            raise ValueError(f"{Path(path).name}: masks must be single-channel")
        arr = arr[..., 0]
    vals = np.unique(arr)
    if not np.isin(vals, (0.0, 1.0)).all():
        raise ValueError(f"{Path(path).name}: mask values not binary, found {vals[:8]}")
    return BinaryMask(arr.astype(np.uint8), spacing, origin)


def _make_header(dims4, spacing, origin, datatype_code: int, descrip: bytes = b"vesselkit") -> bytes:
    nx, ny, nz, nc = dims4
    ndim = 4 if nc > 1 else 3
    hdr = {}
    for name, code, n in _FIELDS:
        if code.endswith("s"):
            hdr[name] = b""
        elif code == "c":
            hdr[name] = b"\x00"
        else:
            hdr[name] = (0,) * n if n > 1 else 0
    hdr.update(
        sizeof_hdr=_HDR_SIZE,
        regular=b"r",
        dim=(ndim, nx, ny, nz, nc if ndim == 4 else 1, 1, 1, 1),
        datatype=datatype_code,
        bitpix=np.dtype(_DTYPE_CODES[datatype_code]).itemsize * 8,
        pixdim=(1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0),
        vox_offset=352.0,
        scl_slope=1.0,
        scl_inter=0.0,
        xyzt_units=b"\x0a",  # mm | sec
        descrip=descrip[:79],
        qform_code=0,
        sform_code=1,
        srow_x=(spacing[0], 0.0, 0.0, origin[0]),
        srow_y=(0.0, spacing[1], 0.0, origin[1]),
        srow_z=(0.0, 0.0, spacing[2], origin[2]),
        magic=b"n+1\x00",
    )
    return _pack_from_dict(hdr) + b"\x00\x00\x00\x00"  # no header extensions


def _write_raw(path, arr4: np.ndarray, spacing, origin, dtype, descrip: bytes = b"vesselkit") -> None:
    path = Path(path)
    hdr = _make_header(arr4.shape, spacing, origin, _CODE_FOR[np.dtype(dtype)], descrip)
    payload = arr4.astype(dtype).tobytes(order="F")
    try:
        with _open_write(path) as fh:
            fh.write(hdr)
            fh.write(payload)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def write_volume(vol: Volume3D, path) -> None:
    """Write a Volume3D as 3D float32 NIfTI; round-trips bit-exact at that width."""
    _write_raw(path, vol.data[..., None], vol.spacing, vol.origin, np.float32)


def write_hypervolume(hv: HyperVolume, path) -> None:
    """Write channels as a 4D float32 NIfTI, channel order preserved.

    Channel names are stored in ``descrip`` (comma-separated) when they fit,
    so a round trip recovers them; otherwise readers see generic names.
    """
    joined = ",".join(hv.channel_names).encode("ascii", "replace")
    descrip = joined if len(joined) <= 79 and b"\x00" not in joined else b"vesselkit"
    _write_raw(path, hv.stack(), hv.spacing, hv.origin, np.float32, descrip)


def write_mask(mask: BinaryMask, path) -> None:
    """Write a BinaryMask as 3D uint8 NIfTI."""
    _write_raw(path, mask.data[..., None], mask.spacing, mask.origin, np.uint8)
