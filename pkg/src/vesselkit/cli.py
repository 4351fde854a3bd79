"""Command-line pipeline: resample, enhance, partition, evaluate, phantom.

Logs go to stderr; machine-readable outputs go to files only.  Every
invocation writes a provenance sidecar next to its outputs: tool name and
version, resolved config hash, sha256 of each input file.  No timestamps
are recorded, so rerunning a command on the same inputs produces
bit-identical files.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
inconsistent inputs), 3 internal error.

All kernels are single-threaded; ``--threads`` is accepted (and recorded)
for interface stability, and results are identical for every value.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
import traceback

import numpy as np

from . import __version__
from .config import PipelineConfig, config_from_dict, config_hash, load_config
from .hypervolume import CHANNEL_NAMES, build_hypervolume, enhanced_channel
from .metrics import (
    PSNR_DEFINITION,
    MetricsReport,
    aggregate_report,
    psnr,
    region_scores,
    report_to_rows,
)
from .nifti import (
    read_mask,
    read_volume,
    write_hypervolume,
    write_mask,
    write_volume,
)
from .partition import bifurcation_mask, build_class_masks, classify_branches
from .phantoms import noisy_tube, tube, two_tubes, y_junction
from .resample import finest_isotropic_spacing, resample_isotropic, resample_mask
from .skeleton import build_graph, distance_transform, graph_to_json, skeletonize
from .volume import BinaryMask

log = logging.getLogger("vesselkit")


class _UsageError(Exception):
    """Bad flags or flag combinations: exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; our usage code is 1
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stem(path: str) -> str:
    base = os.path.basename(path)
    for suf in (".nii.gz", ".nii"):
        if base.endswith(suf):
            return base[: -len(suf)]
    return os.path.splitext(base)[0]


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _provenance(cfg: PipelineConfig, inputs: dict) -> dict:
    return {
        "tool": "vesselkit",
        "version": __version__,
        "config_hash": config_hash(cfg),
        "inputs": {name: _sha256(path) for name, path in inputs.items()},
    }


def _load_cfg(args) -> PipelineConfig:
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
    except (ValueError, TypeError) as exc:
        raise _UsageError(f"config: {exc}") from exc
    if args.config is None:
        log.info("no config file given; using built-in defaults")
    overrides = {}
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "preset", None):
        overrides["preset"] = args.preset
    if overrides:
        d = cfg.to_dict()
        if "threads" in overrides:
            d["threads"] = overrides["threads"]
        if "preset" in overrides:
            d["dataset"] = {"preset": overrides["preset"]}
        try:
            cfg = config_from_dict(d)
        except ValueError as exc:
            raise _UsageError(str(exc)) from exc
    if cfg.threads:
        log.info("threads=%d requested; kernels are single-threaded, results identical", cfg.threads)
    return cfg


def _is_binary_file(path: str) -> bool:
    vol = read_volume(path)
    vals = np.unique(vol.data)
    return vals.size <= 2 and np.isin(vals, (0.0, 1.0)).all()


# ---------------------------------------------------------------------------
# subcommands

def _cmd_resample(args) -> int:
    cfg = _load_cfg(args)
    if args.spacing == "auto":
        target = None
    else:
        try:
            parts = [float(p) for p in args.spacing.split(",")]
        except ValueError as exc:
            raise _UsageError(f"--spacing: {exc}") from exc
        if len(parts) == 1:
            target = parts[0]
        elif len(parts) == 3:
            if len(set(parts)) != 1:
                raise _UsageError("--spacing: output spacing must be isotropic (x=y=z)")
            target = parts[0]
        else:
            raise _UsageError("--spacing expects 'auto', one value, or x,y,z")
        if target is not None and target <= 0:
            raise _UsageError("--spacing must be positive")

    is_mask = _is_binary_file(args.input)
    out = args.out
    if out is None:
        out = os.path.join(cfg.output_dir, _stem(args.input) + "_iso.nii.gz")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)

    if is_mask:
        mask = read_mask(args.input)
        t = target if target is not None else finest_isotropic_spacing([mask])
        log.info("input detected as binary mask; spacing %.6g mm, mode %s", t, args.mask_mode)
        if args.mask_mode == "nn":
            res = resample_mask(mask, t)
        else:
            interp = resample_isotropic(mask.as_volume(), t)
            res = BinaryMask((interp.data >= 0.5).astype(np.uint8), interp.spacing, interp.origin)
        write_mask(res, out)
    else:
        vol = read_volume(args.input)
        t = target if target is not None else finest_isotropic_spacing([vol])
        log.info("resampling volume to isotropic %.6g mm (cubic B-spline)", t)
        write_volume(resample_isotropic(vol, t), out)

    side = _provenance(cfg, {"input": args.input})
    side["outputs"] = [os.path.basename(out)]
    side["spacing_mm"] = t
    side["kind"] = "mask" if is_mask else "volume"
    if is_mask:
        side["mask_mode"] = args.mask_mode
    _write_json(out.replace(".nii.gz", "").replace(".nii", "") + ".json", side)
    log.info("wrote %s", out)
    return 0


def _cmd_enhance(args) -> int:
    cfg = _load_cfg(args)
    if args.channels is not None:
        raise _UsageError(
            "fixed 7-channel contract: the hyper-volume always carries "
            f"{', '.join(CHANNEL_NAMES)}; channel subsetting is not supported"
        )
    vol = read_volume(args.input)
    os.makedirs(args.out, exist_ok=True)

    t0 = time.monotonic()
    hv = build_hypervolume(vol, cfg.filters)
    log.info("hyper-volume assembled in %.1f s", time.monotonic() - t0)

    out = os.path.join(args.out, _stem(args.input) + "_hyper.nii.gz")
    write_hypervolume(hv, out)
    side = _provenance(cfg, {"input": args.input})
    side["outputs"] = [os.path.basename(out)]
    side["channels"] = list(hv.channel_names)
    side["standardization"] = hv.meta["standardization"]
    _write_json(os.path.join(args.out, _stem(args.input) + "_hyper.json"), side)
    log.info("wrote %s", out)
    return 0


def _cmd_partition(args) -> int:
    cfg = _load_cfg(args)
    gt = read_mask(args.gt)
    if gt.count == 0:
        raise ValueError(f"{args.gt}: ground truth has no foreground")
    os.makedirs(args.out, exist_ok=True)

    dist = distance_transform(gt)
    sk = skeletonize(gt, dist)
    graph = build_graph(sk, dist)
    intervals = cfg.intervals
    classes = classify_branches(graph, intervals)
    parts = build_class_masks(graph, classes, gt, intervals)
    radius = args.bif_radius if args.bif_radius is not None else cfg.bifurcation_radius_mm
    m_bif = bifurcation_mask(graph, gt, radius)

    outputs = []
    for name in intervals.class_names:
        path = os.path.join(args.out, f"M_{name}.nii.gz")
        write_mask(parts.masks[name], path)
        outputs.append(os.path.basename(path))
    bif_path = os.path.join(args.out, "m_bif.nii.gz")
    write_mask(m_bif, bif_path)
    outputs.append(os.path.basename(bif_path))
    _write_json(os.path.join(args.out, "graph.json"), graph_to_json(graph))
    outputs.append("graph.json")

    hist = {name: 0 for name in intervals.class_names}
    for c in classes:
        hist[c] += 1
    summary = _provenance(cfg, {"gt": args.gt})
    summary.update(
        {
            "outputs": outputs,
            "intervals": intervals.notation(),
            "n_branches": graph.n_branches,
            "n_bifurcations": len(graph.bifurcations),
            "branch_sizes_mm": [round(float(s), 6) for s in graph.branch_size],
            "size_histogram": hist,
            "bifurcation_radius_mm": radius if radius is not None else "2x local diameter",
        }
    )
    _write_json(os.path.join(args.out, "summary.json"), summary)
    log.info(
        "partition: %d branches, %d bifurcation(s), classes %s",
        graph.n_branches, len(graph.bifurcations), hist,
    )
    return 0


def _region_masks_from(args, cfg: PipelineConfig, gt: BinaryMask) -> dict:
    regions: dict = {}
    if args.masks:
        for name in ("small", "medium", "large"):
            path = os.path.join(args.masks, f"M_{name}.nii.gz")
            if os.path.exists(path):
                regions[name] = read_mask(path)
        bif = os.path.join(args.masks, "m_bif.nii.gz")
        if os.path.exists(bif):
            regions["bifurcations"] = read_mask(bif)
        if not regions:
            raise ValueError(f"no M_*.nii.gz masks found in {args.masks}")
    elif args.preset:
        dist = distance_transform(gt)
        graph = build_graph(skeletonize(gt, dist), dist)
        intervals = cfg.intervals
        parts = build_class_masks(graph, classify_branches(graph, intervals), gt, intervals)
        regions = dict(parts.masks)
        regions["bifurcations"] = bifurcation_mask(graph, gt, cfg.bifurcation_radius_mm)
    return regions


def _evaluate_case(pred_path, gt_path, vol_path, args, cfg) -> MetricsReport:
    pred = read_mask(pred_path)
    gt = read_mask(gt_path)
    regions = _region_masks_from(args, cfg, gt)
    report = region_scores(pred, gt, regions)
    if vol_path:
        report.psnr_db["volume"] = psnr(read_volume(vol_path), gt)
        report.provenance["psnr_definition"] = PSNR_DEFINITION
    report.provenance.update(_provenance(cfg, {
        k: v for k, v in (("pred", pred_path), ("gt", gt_path), ("volume", vol_path)) if v
    }))
    if args.preset or args.masks:
        report.provenance["intervals"] = cfg.intervals.notation()
    return report


def _cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    rows = []
    reports = {}
    if args.batch:
        gts = sorted(
            f for f in os.listdir(args.batch) if f.endswith("_gt.nii.gz")
        )
        if not gts:
            raise ValueError(f"{args.batch}: no *_gt.nii.gz files found")
        for gtf in gts:
            case = gtf[: -len("_gt.nii.gz")]
            predf = os.path.join(args.batch, case + "_pred.nii.gz")
            if not os.path.exists(predf):
                raise ValueError(f"{args.batch}: missing {case}_pred.nii.gz")
            volf = os.path.join(args.batch, case + "_vol.nii.gz")
            rep = _evaluate_case(
                predf, os.path.join(args.batch, gtf),
                volf if os.path.exists(volf) else None, args, cfg,
            )
            reports[case] = rep
            rows.extend(report_to_rows(rep, case))
        agg = aggregate_report(list(reports.values()))
        reports["aggregate"] = agg
        rows.extend(report_to_rows(agg, "aggregate"))
    else:
        if not args.pred or not args.gt:
            raise _UsageError("evaluate needs PRED and GT files (or --batch DIR)")
        rep = _evaluate_case(args.pred, args.gt, args.volume, args, cfg)
        reports["case"] = rep
        rows.extend(report_to_rows(rep, "case"))

    out_json = args.out + ".json"
    out_csv = args.out + ".csv"
    os.makedirs(os.path.dirname(out_json) or ".", exist_ok=True)
    _write_json(out_json, {k: r.to_json() for k, r in reports.items()})
    import csv

    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["case", "region", "metric", "value"])
        w.writeheader()
        w.writerows(rows)
    for name, rep in reports.items():
        g = rep.regions.get("global", {})
        if "dice" in g:
            log.info("%s: dice %.4f clDice %.4f", name, g["dice"], g["cl_dice"])
    log.info("wrote %s and %s", out_json, out_csv)
    return 0


def _cmd_phantom(args) -> int:
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    kind = args.kind
    common = dict(spacing=args.spacing)
    if kind == "tube":
        ph = tube(radius_mm=args.radius, length_mm=args.length,
                  noise_sigma=args.noise, seed=args.seed, **common)
    elif kind == "noisy-tube":
        ph = noisy_tube(radius_mm=args.radius, length_mm=args.length,
                        noise_sigma=args.noise, seed=args.seed, **common)
    elif kind == "y":
        ph = y_junction(trunk_radius_mm=args.trunk_radius, twig_radius_mm=args.twig_radius,
                        size=args.size, **common)
    elif kind == "two-tubes":
        ph = two_tubes(radius1_mm=args.radius, radius2_mm=args.radius2,
                       length_mm=args.length, gap_mm=args.gap, **common)
    else:  # argparse choices make this unreachable
        raise _UsageError(f"unknown phantom kind {kind!r}")

    prefix = kind.replace("-", "_")
    vol_path = os.path.join(args.out, prefix + "_vol.nii.gz")
    gt_path = os.path.join(args.out, prefix + "_gt.nii.gz")
    write_volume(ph.volume, vol_path)
    write_mask(ph.mask, gt_path)

    def _plain(obj):
        if isinstance(obj, dict):
            return {k: _plain(v) for k, v in obj.items() if k != "mask"}
        if isinstance(obj, (list, tuple)):
            return [_plain(v) for v in obj]
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        return obj

    meta = _provenance(cfg, {})
    meta.update(
        {
            "kind": kind,
            "outputs": [os.path.basename(vol_path), os.path.basename(gt_path)],
            "spacing_mm": args.spacing,
            "seed": args.seed,
            "centerline_voxels": ph.centerline.tolist(),
            "meta": _plain(ph.meta),
        }
    )
    _write_json(os.path.join(args.out, prefix + "_meta.json"), meta)
    log.info("wrote %s, %s (%d fg voxels)", vol_path, gt_path, ph.mask.count)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="vesselkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vesselkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker count (results are thread-count invariant)")

    sp = sub.add_parser("resample", help="resample to isotropic spacing")
    sp.add_argument("input")
    sp.add_argument("--spacing", default="auto", help="'auto', one value, or x,y,z (mm)")
    sp.add_argument("--mask-mode", choices=("nn", "bspline"), default="nn",
                    help="mask interpolation: nearest-neighbor or B-spline + 0.5 threshold")
    sp.add_argument("--out", help="output file (default: <stem>_iso.nii.gz)")
    common(sp)
    sp.set_defaults(func=_cmd_resample)

    sp = sub.add_parser("enhance", help="build the 7-channel hyper-volume")
    sp.add_argument("input")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--channels", help=argparse.SUPPRESS)  # refused; fixed contract
    common(sp)
    sp.set_defaults(func=_cmd_enhance)

    sp = sub.add_parser("partition", help="skeleton, graph, and size-partition masks")
    sp.add_argument("gt")
    sp.add_argument("--preset", choices=("ircad", "bullitt"))
    sp.add_argument("--bif-radius", type=float, default=None,
                    help="bifurcation ball radius mm (default: 2x local diameter)")
    sp.add_argument("--out", default=".", help="output directory")
    common(sp)
    sp.set_defaults(func=_cmd_partition)

    sp = sub.add_parser("evaluate", help="dice/clDice report, optionally per region")
    sp.add_argument("pred", nargs="?")
    sp.add_argument("gt", nargs="?")
    sp.add_argument("--volume", help="intensity volume for PSNR")
    sp.add_argument("--masks", help="directory holding M_*.nii.gz region masks")
    sp.add_argument("--preset", choices=("ircad", "bullitt"),
                    help="compute region masks from gt with this preset")
    sp.add_argument("--batch", help="directory of <case>_pred/_gt[/_vol].nii.gz pairs")
    sp.add_argument("--out", default="report", help="output prefix for .json/.csv")
    common(sp)
    sp.set_defaults(func=_cmd_evaluate)

    sp = sub.add_parser("phantom", help="generate synthetic test volumes")
    sp.add_argument("kind", choices=("tube", "y", "two-tubes", "noisy-tube"))
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--spacing", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--radius", type=float, default=2.0, help="tube radius mm")
    sp.add_argument("--radius2", type=float, default=8.0, help="second tube radius mm")
    sp.add_argument("--length", type=float, default=40.0)
    sp.add_argument("--gap", type=float, default=10.0)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--trunk-radius", type=float, default=4.0)
    sp.add_argument("--twig-radius", type=float, default=1.0)
    sp.add_argument("--size", type=int, default=160)
    common(sp)
    sp.set_defaults(func=_cmd_phantom)

    return p


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        log.error("usage: %s", exc)
        return 1
    except (ValueError, OSError) as exc:
        log.error("data: %s", exc)
        return 2
    except Exception:
        log.error("internal error:\n%s", traceback.format_exc())
        return 3


if __name__ == "__main__":
    sys.exit(main())
