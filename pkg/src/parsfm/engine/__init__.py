from .tracks import Track, build_tracks
from .reconstruction import (
    Reconstruction,
    bundle_adjust,
    mean_reprojection_error,
    read_reconstruction,
    validate_reconstruction,
    write_reconstruction,
)
from .incremental import EngineOptions, incremental_reconstruct, select_seed_pair

__all__ = [
    "EngineOptions",
    "Reconstruction",
    "Track",
    "build_tracks",
    "bundle_adjust",
    "incremental_reconstruct",
    "mean_reprojection_error",
    "read_reconstruction",
    "select_seed_pair",
    "validate_reconstruction",
    "write_reconstruction",
]
