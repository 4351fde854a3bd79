"""vesselkit: vessel enhancement, fusion, and size-aware evaluation for 3D angiography."""

__version__ = "0.1.0"

from .volume import Volume3D, BinaryMask, HyperVolume, same_geometry
from .nifti import (
    read_volume,
    write_volume,
    read_hypervolume,
    write_hypervolume,
    read_mask,
    write_mask,
)
from .resample import (
    finest_isotropic_spacing,
    resample_isotropic,
    resample_mask,
    interpolate_at,
)
from .vesselness import FilterParams, multiscale
from .hypervolume import CHANNEL_NAMES, build_hypervolume, enhanced_channel
from .skeleton import (
    DistanceField,
    VesselGraph,
    distance_transform,
    skeletonize,
    build_graph,
    adjacency_matrix,
    graph_to_json,
)
from .partition import (
    SizeIntervals,
    PartitionMasks,
    preset_intervals,
    classify_branches,
    build_class_masks,
    bifurcation_mask,
)
from .metrics import (
    dice,
    cl_dice,
    masked_metric,
    psnr,
    region_scores,
    aggregate_report,
    MetricsReport,
)
from .config import PipelineConfig, load_config, config_from_dict, config_hash

__all__ = [
    "__version__",
    "Volume3D",
    "BinaryMask",
    "HyperVolume",
    "same_geometry",
    "read_volume",
    "write_volume",
    "read_hypervolume",
    "write_hypervolume",
    "read_mask",
    "write_mask",
    "finest_isotropic_spacing",
    "resample_isotropic",
    "resample_mask",
    "interpolate_at",
    "FilterParams",
    "multiscale",
    "CHANNEL_NAMES",
    "build_hypervolume",
    "enhanced_channel",
    "DistanceField",
    "VesselGraph",
    "distance_transform",
    "skeletonize",
    "build_graph",
    "adjacency_matrix",
    "graph_to_json",
    "SizeIntervals",
    "PartitionMasks",
    "preset_intervals",
    "classify_branches",
    "build_class_masks",
    "bifurcation_mask",
    "dice",
    "cl_dice",
    "masked_metric",
    "psnr",
    "region_scores",
    "aggregate_report",
    "MetricsReport",
    "PipelineConfig",
    "load_config",
    "config_from_dict",
    "config_hash",
]
