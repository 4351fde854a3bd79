"""Pipeline configuration: defaults, YAML loading, strict validation.

The config file is a single YAML document with nested sections.  Unknown
keys anywhere are rejected outright rather than ignored, so a typo cannot
silently fall back to a default.  Command-line flags override file values;
the fully resolved configuration is hashed (sha256 over canonical JSON)
and that hash is recorded in every output sidecar.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .partition import SizeIntervals, preset_intervals
from .vesselness import FilterParams

__all__ = ["PipelineConfig", "load_config", "config_from_dict", "config_hash"]

_INTERP_MODES = ("nn", "bspline")


@dataclass
class PipelineConfig:
    """Everything the CLI needs to run the pipeline reproducibly."""

    filters: FilterParams = field(default_factory=FilterParams)
    intervals: SizeIntervals = field(default_factory=lambda: preset_intervals("ircad"))
    bifurcation_radius_mm: float | None = None
    volume_interpolation: str = "bspline"
    mask_interpolation: str = "nn"
    output_dir: str = "."
    threads: int = 0

    def __post_init__(self) -> None:
        if self.volume_interpolation != "bspline":
            raise ValueError(
                "volume interpolation is contractually cubic B-spline; "
                f"got {self.volume_interpolation!r}"
            )
        if self.mask_interpolation not in _INTERP_MODES:
            raise ValueError(
                f"mask interpolation must be one of {_INTERP_MODES}, "
                f"got {self.mask_interpolation!r}"
            )
        if self.bifurcation_radius_mm is not None and self.bifurcation_radius_mm < 0:
            raise ValueError("bifurcation_radius_mm must be >= 0")
        if self.threads < 0:
            raise ValueError("threads must be >= 0 (0 = machine default)")

    def to_dict(self) -> dict:
        """Plain nested dict with stable content (for hashing and echoing)."""
        f = dataclasses.asdict(self.filters)
        f["scales"] = list(f["scales"])
        f["rorpo_lengths"] = list(f["rorpo_lengths"])
        if self.intervals.preset:
            iv = {"preset": self.intervals.preset}
        else:
            iv = {
                "preset": "custom",
                "small_max": self.intervals.small_max,
                "medium_max": (
                    "inf" if math.isinf(self.intervals.medium_max) else self.intervals.medium_max
                ),
            }
        return {
            "filters": f,
            "dataset": iv,
            "bifurcation_radius_mm": self.bifurcation_radius_mm,
            "interpolation": {
                "volume": self.volume_interpolation,
                "mask": self.mask_interpolation,
            },
            "output_dir": self.output_dir,
            "threads": self.threads,
        }


def _reject_unknown(d: dict, allowed: tuple, where: str) -> None:
    unknown = [k for k in d if k not in allowed]
    if unknown:
        raise ValueError(f"unknown config key(s) in {where}: {', '.join(sorted(unknown))}")


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build a validated PipelineConfig from a nested dict."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(f"config root must be a mapping, got {type(raw).__name__}")
    _reject_unknown(
        raw,
        ("filters", "dataset", "bifurcation_radius_mm", "interpolation", "output_dir", "threads"),
        "config root",
    )

    fkw = dict(raw.get("filters") or {})
    known_filter_keys = tuple(f.name for f in dataclasses.fields(FilterParams))
    _reject_unknown(fkw, known_filter_keys, "filters")
    if "scales" in fkw:
        fkw["scales"] = tuple(float(s) for s in fkw["scales"])
    if "rorpo_lengths" in fkw:
        fkw["rorpo_lengths"] = tuple(int(v) for v in fkw["rorpo_lengths"])
    filters = FilterParams(**fkw)

    ds = dict(raw.get("dataset") or {})
    _reject_unknown(ds, ("preset", "small_max", "medium_max"), "dataset")
    preset = ds.get("preset", "ircad")
    if preset == "custom":
        if "small_max" not in ds or "medium_max" not in ds:
            raise ValueError("custom dataset preset needs small_max and medium_max")
        med = ds["medium_max"]
        med = math.inf if med in ("inf", ".inf", None) else float(med)
        intervals = SizeIntervals(float(ds["small_max"]), med)
    else:
        if "small_max" in ds or "medium_max" in ds:
            raise ValueError("small_max/medium_max are only valid with preset: custom")
        intervals = preset_intervals(preset)

    interp = dict(raw.get("interpolation") or {})
    _reject_unknown(interp, ("volume", "mask"), "interpolation")

    bif = raw.get("bifurcation_radius_mm")
    return PipelineConfig(
        filters=filters,
        intervals=intervals,
        bifurcation_radius_mm=None if bif is None else float(bif),
        volume_interpolation=interp.get("volume", "bspline"),
        mask_interpolation=interp.get("mask", "nn"),
        output_dir=str(raw.get("output_dir", ".")),
        threads=int(raw.get("threads", 0)),
    )


def load_config(path: str) -> PipelineConfig:
    """Load and validate a YAML config file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw)


def config_hash(cfg: PipelineConfig) -> str:
    """sha256 over the canonical JSON form of the resolved config.

    Execution details (thread count, output directory) are excluded: two runs
    that differ only in those produce identical results, and the hash is meant
    to identify the result-determining parameters.
    """
    d = cfg.to_dict()
    d.pop("threads", None)
    d.pop("output_dir", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
