"""Reconstruction quality metrics against generated ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import mean_reprojection_error
from ..geometry import DegenerateGeometryError, umeyama_similarity


@dataclass
class EvalMetrics:
    registered_images: int = 0
    total_images: int = 0
    point_count: int = 0
    mean_reprojection_px: float = 0.0
    position_rmse: float = None  # scene units, after similarity alignment
    rotation_error_mean_deg: float = None
    rotation_error_max_deg: float = None
    stage_times: dict = field(default_factory=dict)

    def summary(self) -> str:
        lines = [
            f"registered images: {self.registered_images}/{self.total_images}",
            f"points: {self.point_count}",
            f"mean reprojection: {self.mean_reprojection_px:.6g} px",
        ]
        if self.position_rmse is not None:
            lines.append(f"position RMSE: {self.position_rmse:.6g}")
            lines.append(
                "rotation error: mean %.6g deg, max %.6g deg"
                % (self.rotation_error_mean_deg, self.rotation_error_max_deg)
            )
        for stage, t in self.stage_times.items():
            lines.append(f"time[{stage}]: {t:.3f} s")
        return "\n".join(lines)


def evaluate(recon, ground_truth, features=None, total_images=None) -> EvalMetrics:
    """Align the reconstruction to ground-truth camera centers and report
    position/rotation errors plus basic counts.

    Alignment needs >=3 cameras shared with the ground truth; with fewer,
    only the counts (and reprojection error, if features are given) are
    filled in.
    """
    gt_poses = ground_truth["poses"]
    metrics = EvalMetrics(
        registered_images=recon.num_cameras(),
        total_images=total_images if total_images is not None else len(gt_poses),
        point_count=recon.num_points(),
    )
    if features is not None:
        metrics.mean_reprojection_px = mean_reprojection_error(recon, features)

    common = sorted(set(recon.cameras) & set(gt_poses))
    if len(common) < 3:
        return metrics
    est = np.array([recon.cameras[i][1].center() for i in common])
    gt = np.array([gt_poses[i].center() for i in common])
    try:
        T, _ = umeyama_similarity(est, gt)
    except DegenerateGeometryError:
        return metrics
    aligned = T.apply(est)
    metrics.position_rmse = float(
        np.sqrt(((aligned - gt) ** 2).sum(axis=1).mean())
    )
    angles = []
    for i in common:
        R_est = recon.cameras[i][1].rotation @ T.rotation.T
        c = np.clip((np.trace(gt_poses[i].rotation @ R_est.T) - 1.0) / 2.0, -1.0, 1.0)
        angles.append(np.degrees(np.arccos(c)))
    metrics.rotation_error_mean_deg = float(np.mean(angles))
    metrics.rotation_error_max_deg = float(np.max(angles))
    return metrics
