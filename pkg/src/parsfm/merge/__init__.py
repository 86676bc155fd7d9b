from .correspond import (
    CorrespondenceGraph,
    build_correspondence_graph,
    strategy_match_counts,
)
from .common import CommonPointSet, find_common_points
from .ransac import MergeFailure, ransac_similarity, transform_residual
from .merging import (
    MergeOptions,
    MergeReport,
    MergeStep,
    merge_all,
    merge_pair,
    transform_pose,
)
from .geo import (
    GcpRecord,
    GeoReport,
    georeference,
    read_gcps,
    triangulate_gcp,
    write_gcps,
)

__all__ = [
    "CommonPointSet",
    "CorrespondenceGraph",
    "GcpRecord",
    "GeoReport",
    "MergeFailure",
    "MergeOptions",
    "MergeReport",
    "MergeStep",
    "build_correspondence_graph",
    "find_common_points",
    "georeference",
    "merge_all",
    "merge_pair",
    "ransac_similarity",
    "read_gcps",
    "strategy_match_counts",
    "transform_pose",
    "transform_residual",
    "triangulate_gcp",
    "write_gcps",
]
