"""Tubularity filters: Frangi, Jerman, Sato, Zhang, Meijering.

All five share the same skeleton: eigenvalues (l1, l2, l3, sorted by
magnitude) of the gamma-normalized Hessian at each scale, a sign-regime gate
restricting response to bright-on-dark tubular curvature, and a voxelwise
maximum over scales. The morphological RORPO filter lives in its own module;
`multiscale` dispatches to it under the same interface.

Formulas, in the bright-vessel convention (l2, l3 < 0 inside tubes):

* Frangi: V = (1 - exp(-Ra^2/2a^2)) * exp(-Rb^2/2b^2) * (1 - exp(-S^2/2c^2))
  with Ra = |l2|/|l3|, Rb = |l1|/sqrt(|l2 l3|), S = sqrt(l1^2+l2^2+l3^2);
  c = "auto" resolves to half the largest S in the volume at that scale.
* Sato: lc = sqrt(|l2 l3|); V = lc * exp(-l1^2 / (2 (a lc)^2)) with the
  asymmetric weight a = alpha1 where l1 < 0 and alpha2 where l1 >= 0.
* Jerman: with l2' = -l2, and lr = -l3 clamped below at tau * max(-l3)
  over the volume at that scale: V = 1 where l2' >= lr/2 > 0, else
  l2'^2 (lr - l2') (3/(l2'+lr))^3, else 0. The clamp keeps the response from
  collapsing in low-contrast regions; the saturation branch makes the filter
  respond fully at rounded structures such as bifurcations.
* Zhang: Frangi's three factors times a noise gate exp(-2 eta / (|l2| l3^2)),
  eta = zhang_kappa * max(|l2| l3^2) over the in-regime voxels at that scale.
  (Several vesselness variants circulate under this name; this four-factor
  refinement of Frangi is the form implemented here, recorded explicitly.)
* Meijering: modified eigenvalues l_i' = l_i + alpha * sum of the other two,
  alpha = -1/3; raw response |l'_min| where l'_min < 0 and l3 < 0, scaled by
  the volume-wide largest |l'_min| so each scale lies in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .scalespace import EigenTriple, eig_field, hessian_at_scale
from .volume import Volume3D

__all__ = [
    "FilterParams",
    "HESSIAN_FILTERS",
    "FILTER_IDS",
    "default_scales",
    "frangi_response",
    "sato_response",
    "jerman_response",
    "zhang_response",
    "meijering_response",
    "multiscale",
    "normalize_response",
]

HESSIAN_FILTERS = ("frangi", "jerman", "sato", "zhang", "meijering")
FILTER_IDS = HESSIAN_FILTERS + ("rorpo",)


def default_scales(min_spacing_mm: float, max_radius_mm: float, n: int = 5) -> tuple:
    """Log-spaced scale grid from 0.6x the voxel pitch up to the largest
    expected vessel radius."""
    lo = 0.6 * min_spacing_mm
    if not 0 < lo < max_radius_mm:
        raise ValueError(f"need 0 < 0.6*spacing < max radius, got {lo}, {max_radius_mm}")
    return tuple(float(s) for s in np.geomspace(lo, max_radius_mm, n))


@dataclass(frozen=True)
class FilterParams:
    """Shared parameter block for all six filters.

    ``scales`` are sigma values in mm for the Hessian filters;
    ``rorpo_lengths`` are path lengths in voxels and should exceed the
    diameter in voxels of the thickest vessel of interest, otherwise tubes
    start looking like blobs to the orientation ranking.
    """

    scales: tuple = (0.6, 0.9, 1.35, 2.0, 3.0)
    frangi_alpha: float = 0.5
    frangi_beta: float = 0.5
    frangi_c: object = "auto"
    jerman_tau: float = 0.5
    sato_alpha1: float = 0.5
    sato_alpha2: float = 2.0
    meijering_alpha: float = -1.0 / 3.0
    zhang_c: object = "auto"
    zhang_kappa: float = 0.01
    rorpo_lengths: tuple = (7, 10, 14)
    rorpo_dilation: int = 0
    polarity: str = "bright-on-dark"

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "rorpo_lengths", tuple(int(v) for v in self.rorpo_lengths))
        s = self.scales
        if len(s) == 0 or any(not np.isfinite(v) or v <= 0 for v in s):
            raise ValueError(f"scales must be positive and nonempty, got {s}")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError(f"scales must be strictly increasing, got {s}")
        for name in ("frangi_alpha", "frangi_beta", "jerman_tau"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        for name in ("sato_alpha1", "sato_alpha2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for cname in ("frangi_c", "zhang_c"):
            c = getattr(self, cname)
            if not (c == "auto" or (np.isreal(c) and float(c) > 0)):
                raise ValueError(f'{cname} must be "auto" or a positive number, got {c!r}')
        if self.zhang_kappa < 0:
            raise ValueError("zhang_kappa must be >= 0")
        ls = self.rorpo_lengths
        if len(ls) == 0 or any(v < 2 for v in ls) or any(b <= a for a, b in zip(ls, ls[1:])):
            raise ValueError(f"rorpo_lengths must be strictly increasing ints >= 2, got {ls}")
        if not (isinstance(self.rorpo_dilation, (int, np.integer)) and self.rorpo_dilation >= 0):
            raise ValueError("rorpo_dilation must be a nonnegative integer")
        if self.polarity not in ("bright-on-dark", "dark-on-bright"):
            raise ValueError(f"unknown polarity {self.polarity!r}")

    def with_(self, **kw) -> "FilterParams":
        return replace(self, **kw)


def _require_number(c, name):
    if c == "auto":
        raise ValueError(
            f"{name} is 'auto'; pointwise evaluation needs a number "
            "(auto resolves per volume inside multiscale)"
        )
    return float(c)


def _frangi_field(l1, l2, l3, alpha, beta, c):
    regime = (l2 < 0) & (l3 < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ra2 = np.where(regime, (l2 / l3) ** 2, 0.0)
        rb2 = np.where(regime, l1**2 / np.abs(l2 * l3), 0.0)
    s2 = l1**2 + l2**2 + l3**2
    v = (
        (1.0 - np.exp(-ra2 / (2.0 * alpha**2)))
        * np.exp(-rb2 / (2.0 * beta**2))
        * (1.0 - np.exp(-s2 / (2.0 * c**2)))
    )
    return np.where(regime, v, 0.0)


def _sato_field(l1, l2, l3, alpha1, alpha2):
    regime = (l2 < 0) & (l3 < 0)
    lc = np.where(regime, np.sqrt(np.abs(l2 * l3)), 0.0)
    a = np.where(l1 < 0, alpha1, alpha2)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(lc > 0, np.exp(-(l1**2) / (2.0 * (a * lc) ** 2)), 0.0)
    return lc * w


def _jerman_field(l1, l2, l3, tau, max_abs_l3):
    l2p = -l2
    l3p = -l3
    if max_abs_l3 <= 0:
        return np.zeros_like(l2p)
    floor = tau * max_abs_l3
    lr = np.where(l3p >= floor, l3p, np.where(l3p > 0, floor, 0.0))
    regime = (l2p > 0) & (lr > 0)
    saturated = regime & (l2p >= lr / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        body = l2p**2 * (lr - l2p) * (3.0 / (l2p + lr)) ** 3
    v = np.where(saturated, 1.0, np.where(regime, body, 0.0))
    return np.clip(v, 0.0, 1.0)


def _zhang_field(l1, l2, l3, alpha, beta, c, eta):
    base = _frangi_field(l1, l2, l3, alpha, beta, c)
    if eta <= 0:
        return base
    regime = (l2 < 0) & (l3 < 0)
    prod = np.abs(l2) * l3**2
    with np.errstate(divide="ignore", invalid="ignore"):
        gate = np.where(prod > 0, np.exp(-2.0 * eta / prod), 0.0)
    return np.where(regime, base * gate, 0.0)


def _meijering_modified(l1, l2, l3, alpha):
    t = l1 + l2 + l3
    m1 = l1 + alpha * (t - l1)
    m2 = l2 + alpha * (t - l2)
    m3 = l3 + alpha * (t - l3)
    return np.minimum(np.minimum(m1, m2), m3)


def _meijering_field(l1, l2, l3, alpha):
    lmin = _meijering_modified(l1, l2, l3, alpha)
    raw = np.where((lmin < 0) & (l3 < 0), -lmin, 0.0)
    return raw


def frangi_response(e: EigenTriple, p: FilterParams) -> float:
    """Frangi vesselness of one eigenvalue triple; requires numeric frangi_c."""
    c = _require_number(p.frangi_c, "frangi_c")
    arr = [np.array([v], dtype=np.float64) for v in e]
    return float(_frangi_field(*arr, p.frangi_alpha, p.frangi_beta, c)[0])


def sato_response(e: EigenTriple, p: FilterParams) -> float:
    """Sato line measure of one eigenvalue triple (unnormalized, >= 0)."""
    arr = [np.array([v], dtype=np.float64) for v in e]
    return float(_sato_field(*arr, p.sato_alpha1, p.sato_alpha2)[0])


def jerman_response(e: EigenTriple, max_abs_lambda3: float, p: FilterParams) -> float:
    """Jerman response of one triple given the volume-wide max of |lambda3|."""
    arr = [np.array([v], dtype=np.float64) for v in e]
    return float(_jerman_field(*arr, p.jerman_tau, float(max_abs_lambda3))[0])


def zhang_response(
    e: EigenTriple, p: FilterParams, c: float | None = None, eta: float = 0.0
) -> float:
    """Four-factor response of one triple; eta is the resolved noise floor."""
    c = _require_number(p.zhang_c if c is None else c, "zhang_c")
    arr = [np.array([v], dtype=np.float64) for v in e]
    return float(_zhang_field(*arr, p.frangi_alpha, p.frangi_beta, c, float(eta))[0])


def meijering_response(e: EigenTriple, p: FilterParams) -> float:
    """Neuriteness magnitude |l'_min| of one triple (volume scaling not applied)."""
    arr = [np.array([v], dtype=np.float64) for v in e]
    return float(_meijering_field(*arr, p.meijering_alpha)[0])


class _SweepContext:
    """Volume-wide calibration constants gathered across the scale sweep.

    Auto constants that the filter definitions tie to "the volume" (Frangi's
    c, Zhang's noise floor, Meijering's normalizer) are resolved once over
    all scales, so per-scale responses stay mutually comparable and the scale
    of peak response carries information. Jerman's lambda-rho floor is the
    exception: its published definition fixes tau relative to each scale's
    own |lambda3| maximum, so that one is kept per scale.
    """

    def __init__(self):
        self.max_s = 0.0
        self.max_abs_l3_per_scale = []
        self.max_zhang_prod = 0.0
        self.max_meijering = 0.0

    def absorb(self, l1, l2, l3, p: FilterParams):
        self.max_s = max(self.max_s, float(np.sqrt(l1**2 + l2**2 + l3**2).max()))
        self.max_abs_l3_per_scale.append(float((-l3).max(initial=0.0)))
        regime = (l2 < 0) & (l3 < 0)
        prod = np.where(regime, np.abs(l2) * l3**2, 0.0)
        self.max_zhang_prod = max(self.max_zhang_prod, float(prod.max(initial=0.0)))
        raw = _meijering_field(l1, l2, l3, p.meijering_alpha)
        self.max_meijering = max(self.max_meijering, float(raw.max(initial=0.0)))

    def auto_c(self, configured):
        if configured != "auto":
            return float(configured)
        return self.max_s / 2.0 if self.max_s > 0 else 1.0


def _scale_response(filter_id, l1, l2, l3, p: FilterParams, ctx: _SweepContext, i: int):
    if filter_id == "frangi":
        c = ctx.auto_c(p.frangi_c)
        return _frangi_field(l1, l2, l3, p.frangi_alpha, p.frangi_beta, c)
    if filter_id == "sato":
        return _sato_field(l1, l2, l3, p.sato_alpha1, p.sato_alpha2)
    if filter_id == "jerman":
        return _jerman_field(l1, l2, l3, p.jerman_tau, ctx.max_abs_l3_per_scale[i])
    if filter_id == "zhang":
        c = ctx.auto_c(p.zhang_c)
        eta = p.zhang_kappa * ctx.max_zhang_prod
        return _zhang_field(l1, l2, l3, p.frangi_alpha, p.frangi_beta, c, eta)
    if filter_id == "meijering":
        raw = _meijering_field(l1, l2, l3, p.meijering_alpha)
        m = ctx.max_meijering
        return raw / m if m > 0 else raw
    raise ValueError(f"unknown Hessian filter {filter_id!r}")


# cache per-scale eigenfields up to this many bytes; recompute beyond it
_EIG_CACHE_BYTES = 512 * 1024 * 1024


def multiscale(
    vol: Volume3D, filter_id: str, p: FilterParams, normalize: bool = True
) -> Volume3D:
    """Voxelwise max of per-scale (or per-length) responses, then min-max
    normalized to [0, 1] unless ``normalize=False``."""
    if filter_id not in FILTER_IDS:
        raise ValueError(f"unknown filter {filter_id!r}; expected one of {FILTER_IDS}")
    if filter_id == "rorpo":
        from .rorpo import rorpo_response

        out = rorpo_response(vol, p)
        return normalize_response(out) if normalize else out
    if p.polarity == "dark-on-bright":
        vol = vol.with_data(-vol.data)
    ctx = _SweepContext()
    keep = vol.data.size * len(p.scales) * 3 * 8 <= _EIG_CACHE_BYTES
    cached = []
    for sigma in p.scales:
        trip = eig_field(hessian_at_scale(vol, sigma))
        ctx.absorb(*trip, p)
        cached.append(trip if keep else None)
    best = None
    for i, sigma in enumerate(p.scales):
        trip = cached[i]
        if trip is None:
            trip = eig_field(hessian_at_scale(vol, sigma))
        resp = _scale_response(filter_id, *trip, p, ctx, i)
        best = resp if best is None else np.maximum(best, resp)
    out = vol.with_data(best)
    return normalize_response(out) if normalize else out


def normalize_response(vol: Volume3D) -> Volume3D:
    """(v - min) / (max - min); a constant volume maps to all zeros."""
    data = vol.data.astype(np.float64)
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return vol.with_data(np.zeros_like(data))
    return vol.with_data((data - lo) / (hi - lo))
