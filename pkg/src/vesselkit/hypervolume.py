"""Assembly of the seven-channel fusion stack.

The stack concatenates the original scan with the six normalized filter
responses in a fixed order::

    Original, Frangi, Jerman, Sato, Zhang, Meijering, RORPO

Channels 1..6 are multiscale vesselness responses, each min-max normalized
to [0, 1] (see :func:`vesselkit.vesselness.multiscale`).  Channel 0 is the
original volume standardized by z-score over its nonzero body region; the
standardization parameters are stored in ``HyperVolume.meta`` so that
downstream consumers can invert it.

Filter channels are mutually independent; they are computed one after the
other here and gathered in order, so the result does not depend on any
execution schedule.
"""

from __future__ import annotations

import warnings

import numpy as np

from .vesselness import FilterParams, multiscale
from .volume import BinaryMask, HyperVolume, Volume3D, same_geometry

__all__ = [
    "CHANNEL_NAMES",
    "build_hypervolume",
    "enhanced_channel",
    "psnr_gain_report",
]

#: Fixed channel order of the fusion stack.  Compile-time constant: writers
#: and readers both rely on it, and subsetting is deliberately unsupported.
CHANNEL_NAMES = ("Original", "Frangi", "Jerman", "Sato", "Zhang", "Meijering", "RORPO")

# filter ids of channels 1..6, aligned with CHANNEL_NAMES[1:]
_FILTER_IDS = ("frangi", "jerman", "sato", "zhang", "meijering", "rorpo")


def _standardize_original(vol: Volume3D) -> tuple[np.ndarray, dict]:
    """Z-score ``vol`` over its nonzero body region.

    Returns the standardized array (float32, full volume) and a metadata
    dict with the applied ``mean`` and ``std`` so the transform can be
    inverted.  A constant body (or an all-zero volume) falls back to a
    divisor of 1 to keep the map affine and invertible.
    """
    data = vol.data
    body = data != 0
    n_body = int(body.sum())
    if n_body > 0:
        sample = data[body].astype(np.float64)
        mean = float(sample.mean())
        std = float(sample.std())
    else:
        mean = 0.0
        std = 0.0
    if std == 0.0:
        std = 1.0
    out = ((data.astype(np.float64) - mean) / std).astype(np.float32)
    meta = {
        "method": "z-score",
        "region": "nonzero",
        "mean": mean,
        "std": std,
        "body_voxels": n_body,
    }
    return out, meta


def build_hypervolume(original: Volume3D, p: FilterParams | None = None) -> HyperVolume:
    """Run all six filters on ``original`` and stack them behind it.

    Parameters
    ----------
    original : Volume3D
        Input scan.  Expected to be isotropically resampled; a warning is
        emitted otherwise (the scale sweep uses millimetre sigmas, so the
        filters still run, just with anisotropic voxel support).
    p : FilterParams, optional
        Shared filter parameters.  Defaults to ``FilterParams()``.

    Returns
    -------
    HyperVolume
        Seven channels named per :data:`CHANNEL_NAMES`.  ``meta`` carries the
        channel-0 standardization parameters under ``"standardization"``.

    Raises
    ------
    RuntimeError
        If any filter fails; the message names the failed channel.
    """
    if p is None:
        p = FilterParams()
    sp = original.spacing
    if max(sp) > min(sp) * (1.0 + 1e-6):
        warnings.warn(
            f"input spacing {sp} is anisotropic; consider resample_isotropic first",
            stacklevel=2,
        )

    std_data, std_meta = _standardize_original(original)
    channels = [Volume3D(std_data, original.spacing, original.origin)]

    for name, fid in zip(CHANNEL_NAMES[1:], _FILTER_IDS):
        try:
            channels.append(multiscale(original, fid, p))
        except Exception as exc:
            raise RuntimeError(f"filter channel {name!r} failed: {exc}") from exc

    return HyperVolume(
        channels=channels,
        channel_names=list(CHANNEL_NAMES),
        meta={"standardization": std_meta},
    )


def enhanced_channel(hv: HyperVolume) -> Volume3D:
    """Voxelwise maximum of the six filter channels.

    This is the "enhanced" image used for PSNR reporting: each filter is
    already normalized to [0, 1], and the max fuses them into a single
    response without preferring any one filter.
    """
    if list(hv.channel_names) != list(CHANNEL_NAMES):
        raise ValueError(
            f"expected the fixed 7-channel stack {list(CHANNEL_NAMES)}, "
            f"got {list(hv.channel_names)}"
        )
    fused = np.maximum.reduce([ch.data for ch in hv.channels[1:]])
    ref = hv.channels[0]
    return Volume3D(np.ascontiguousarray(fused, dtype=np.float32), ref.spacing, ref.origin)


def psnr_gain_report(
    original: Volume3D, enhanced: Volume3D, gt: BinaryMask
) -> tuple[float, float]:
    """PSNR of the raw volume and of an enhanced channel, against ``gt``.

    Both values use the metrics-module PSNR definition (min-max normalized
    intensities, foreground peak over background MSE).  Returns
    ``(psnr_before, psnr_after)`` in dB.
    """
    # local import: keeps pure stack assembly importable without the
    # evaluation stack
    from .metrics import psnr

    if not same_geometry(original, enhanced) or not same_geometry(original, gt):
        raise ValueError("original, enhanced and gt must share geometry")
    return psnr(original, gt), psnr(enhanced, gt)
