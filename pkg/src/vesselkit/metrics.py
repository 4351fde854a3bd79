"""Dice, clDice, region-masked variants, PSNR, and report aggregation.

Empty-mask conventions, chosen for continuity and stated here once:

* dice: both masks empty -> 1.0 (nothing to get wrong).
* cl_dice: both masks empty -> 1.0; exactly one empty -> 0.0.
* masked_metric: an empty region mask yields no score at all (None); a
  region that exists but is predicted empty still scores normally.

PSNR here is 10*log10(peak^2 / MSE_bg) where peak is the mean intensity
over the ground-truth foreground and MSE_bg the mean squared intensity
over the background, both computed after min-max normalizing the volume
to [0, 1].  The definition is normalization-invariant by construction and
is recorded in every report; PSNR numbers are comparable only within this
tool.  A background with exactly zero energy returns +inf ("clean" in
serialized reports).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .skeleton import skeletonize
from .volume import BinaryMask, Volume3D, same_geometry

__all__ = [
    "dice",
    "cl_dice",
    "masked_metric",
    "psnr",
    "MetricsReport",
    "region_scores",
    "aggregate_report",
    "report_to_rows",
]

REPORT_SCHEMA = "vesselkit-metrics/1"

PSNR_DEFINITION = (
    "10*log10(peak^2/mse_bg); peak = mean over gt foreground, mse_bg = mean "
    "squared intensity over background, after min-max normalization to [0,1]"
)


def _check_geometry(a, b, what: str) -> None:
    if not same_geometry(a, b):
        raise ValueError(f"{what}: geometry mismatch ({a.dims} vs {b.dims})")


def dice(pred: BinaryMask, gt: BinaryMask) -> float:
    """2|P&G| / (|P|+|G|).  Both empty -> 1.0."""
    _check_geometry(pred, gt, "dice")
    p = pred.bool_data
    g = gt.bool_data
    denom = int(p.sum()) + int(g.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / denom


def cl_dice(pred: BinaryMask, gt: BinaryMask) -> float:
    """Centerline Dice: harmonic mean of topology precision and sensitivity.

    Tprec = |skel(pred) & gt| / |skel(pred)|, Tsens = |skel(gt) & pred| /
    |skel(gt)|, using this package's skeletonize.  Sensitive to centerline
    breaks that barely change volumetric overlap.
    """
    _check_geometry(pred, gt, "cl_dice")
    np_, ng = pred.count, gt.count
    if np_ == 0 and ng == 0:
        return 1.0
    if np_ == 0 or ng == 0:
        return 0.0
    skp = skeletonize(pred).bool_data
    skg = skeletonize(gt).bool_data
    tprec = int(np.logical_and(skp, gt.bool_data).sum()) / int(skp.sum())
    tsens = int(np.logical_and(skg, pred.bool_data).sum()) / int(skg.sum())
    if tprec + tsens == 0.0:
        return 0.0
    return 2.0 * tprec * tsens / (tprec + tsens)


def masked_metric(pred: BinaryMask, gt: BinaryMask, region: BinaryMask, which: str):
    """Metric restricted to a region: pred&region vs gt&region.

    Returns None when the region mask is empty (the region is absent for
    this case and must not contribute a score).  ``which`` is "dice" or
    "cl_dice".
    """
    _check_geometry(pred, gt, "masked_metric")
    _check_geometry(pred, region, "masked_metric region")
    if which not in ("dice", "cl_dice"):
        raise ValueError(f"unknown metric {which!r}")
    if region.count == 0:
        return None
    r = region.bool_data
    mp = pred.with_data(np.logical_and(pred.bool_data, r))
    mg = gt.with_data(np.logical_and(gt.bool_data, r))
    fn = dice if which == "dice" else cl_dice
    return fn(mp, mg)


def psnr(vol: Volume3D, gt: BinaryMask) -> float:
    """Foreground-peak over background-MSE ratio in dB (see module docs).

    Raises on an empty foreground or background, or a constant volume
    (min-max normalization is undefined there).  Returns +inf when the
    background is exactly zero after normalization.
    """
    _check_geometry(vol, gt, "psnr")
    g = gt.bool_data
    n_fg = int(g.sum())
    n_bg = g.size - n_fg
    if n_fg == 0:
        raise ValueError("psnr: ground truth has no foreground")
    if n_bg == 0:
        raise ValueError("psnr: ground truth has no background")
    data = vol.data.astype(np.float64)
    lo = float(data.min())
    hi = float(data.max())
    if hi == lo:
        raise ValueError("psnr: volume is constant, normalization undefined")
    norm = (data - lo) / (hi - lo)
    peak = float(norm[g].mean())
    mse = float((norm[~g] ** 2).mean())
    if mse == 0.0:
        return math.inf
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak * peak / mse)


# ---------------------------------------------------------------------------
# reports

@dataclass
class MetricsReport:
    """Scores per region plus provenance.

    ``regions`` maps region name -> {metric name -> value}; absent regions
    (empty region mask) are simply missing from the mapping.  Aggregated
    reports use "<metric>_mean" / "<metric>_std" keys and record the
    per-region case count as "n".
    """

    regions: dict = field(default_factory=dict)
    psnr_db: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def _enc(v):
            if isinstance(v, float) and math.isinf(v):
                return "clean" if v > 0 else "-inf"
            return v

        return {
            "schema": REPORT_SCHEMA,
            "regions": {
                r: {k: _enc(v) for k, v in m.items()} for r, m in self.regions.items()
            },
            "psnr_db": {k: _enc(v) for k, v in self.psnr_db.items()},
            "provenance": self.provenance,
        }


def region_scores(
    pred: BinaryMask, gt: BinaryMask, region_masks: dict | None = None
) -> MetricsReport:
    """Global and per-region dice/cl_dice for one case.

    ``region_masks`` maps region name -> BinaryMask; regions with empty
    masks are recorded as absent.  The "global" region is always present.
    """
    report = MetricsReport()
    report.regions["global"] = {
        "dice": dice(pred, gt),
        "cl_dice": cl_dice(pred, gt),
        "pred_voxels": pred.count,
        "gt_voxels": gt.count,
    }
    for name, region in (region_masks or {}).items():
        d = masked_metric(pred, gt, region, "dice")
        if d is None:
            continue
        report.regions[name] = {
            "dice": d,
            "cl_dice": masked_metric(pred, gt, region, "cl_dice"),
            "region_voxels": region.count,
        }
    return report


def aggregate_report(per_case: list) -> MetricsReport:
    """Mean and sample std over cases, region by region.

    A region absent in some case is excluded from that region's
    denominator.  With a single contributing case the std is reported as
    0.  PSNR entries aggregate the same way; infinite (clean) values are
    excluded with their count noted.
    """
    if not per_case:
        raise ValueError("aggregate_report: no cases")
    out = MetricsReport(provenance={"n_cases": len(per_case)})
    region_names: list[str] = []
    for rep in per_case:
        for r in rep.regions:
            if r not in region_names:
                region_names.append(r)
    for r in region_names:
        vals: dict[str, list[float]] = {}
        for rep in per_case:
            m = rep.regions.get(r)
            if m is None:
                continue
            for k, v in m.items():
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    vals.setdefault(k, []).append(float(v))
        agg: dict[str, float] = {}
        n_region = 0
        for k, seq in vals.items():
            if k.endswith("_voxels"):
                continue
            n_region = max(n_region, len(seq))
            arr = np.asarray(seq, dtype=np.float64)
            agg[f"{k}_mean"] = float(arr.mean())
            agg[f"{k}_std"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        agg["n"] = n_region
        out.regions[r] = agg
    psnr_keys: list[str] = []
    for rep in per_case:
        for k in rep.psnr_db:
            if k not in psnr_keys:
                psnr_keys.append(k)
    for k in psnr_keys:
        seq = [rep.psnr_db[k] for rep in per_case if k in rep.psnr_db]
        finite = [v for v in seq if math.isfinite(v)]
        if finite:
            arr = np.asarray(finite, dtype=np.float64)
            out.psnr_db[f"{k}_mean"] = float(arr.mean())
            out.psnr_db[f"{k}_std"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        if len(finite) != len(seq):
            out.psnr_db[f"{k}_clean_count"] = len(seq) - len(finite)
    return out


def report_to_rows(report: MetricsReport, case_id: str) -> list[dict]:
    """Flatten a report to CSV rows: one row per region x metric."""
    rows = []
    for r, m in report.regions.items():
        for k, v in m.items():
            if isinstance(v, float) and math.isinf(v):
                v = "clean"
            rows.append({"case": case_id, "region": r, "metric": k, "value": v})
    for k, v in report.psnr_db.items():
        if isinstance(v, float) and math.isinf(v):
            v = "clean"
        rows.append({"case": case_id, "region": "", "metric": f"psnr_{k}", "value": v})
    return rows
