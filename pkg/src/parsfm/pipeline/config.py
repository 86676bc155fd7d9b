"""Run configuration with the default parameter values used throughout."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

WORKER_COUNT_ENV = "PARSFM_WORKERS"


def default_worker_count() -> int:
    return max(1, int(os.environ.get(WORKER_COUNT_ENV, "1")))


@dataclass
class PipelineConfig:
    r_ew: float = 0.5
    r_vw: float = 0.5
    min_matches: int = 50
    index_features: int = 1500
    top_k: int = 100
    cluster_max_size: int = 100
    merge_threshold_px: float = 1.8
    worker_count: int = field(default_factory=default_worker_count)
    rng_seed: int = 0
    vocab_branching: int = 8
    vocab_depth: int = 3
    dataset_path: str = "dataset.txt"
    output_dir: str = "parsfm_out"

    def __post_init__(self):
        for name in ("r_ew", "r_vw"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in (
            "min_matches",
            "index_features",
            "top_k",
            "worker_count",
            "vocab_branching",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.cluster_max_size < 2:
            raise ValueError("cluster_max_size must be >= 2")
        if self.merge_threshold_px <= 0:
            raise ValueError("merge_threshold_px must be positive")
        if self.vocab_depth < 0:
            raise ValueError("vocab_depth must be >= 0")
