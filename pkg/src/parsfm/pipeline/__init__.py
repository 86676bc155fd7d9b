from .config import PipelineConfig, default_worker_count
from .evaluate import EvalMetrics, evaluate
from .run import PipelineError, build_graph, run_pipeline
from .synth import (
    SynthConfig,
    generate_synthetic,
    read_ground_truth,
    write_ground_truth,
    write_synthetic,
)

__all__ = [
    "EvalMetrics",
    "PipelineConfig",
    "PipelineError",
    "SynthConfig",
    "build_graph",
    "default_worker_count",
    "evaluate",
    "generate_synthetic",
    "read_ground_truth",
    "run_pipeline",
    "write_ground_truth",
    "write_synthetic",
]
