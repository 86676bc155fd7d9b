"""Geo-referencing with surveyed ground control points.

Control points pin the model to the survey frame (similarity alignment plus
a constrained BA); check points are held out and report per-axis residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import Reconstruction
from ..geometry import (
    BaOptions,
    DegenerateGeometryError,
    EstimationFailure,
    solve_bundle,
    triangulate,
    umeyama_similarity,
)
from .merging import transform_pose

_F = "%.17g"


@dataclass
class GcpRecord:
    gcp_id: int
    world: np.ndarray  # survey-frame coordinate, meters
    observations: list = field(default_factory=list)  # (image_id, pixel)
    role: str = "control"

    def __post_init__(self):
        self.world = np.asarray(self.world, dtype=float).reshape(3)
        if self.role not in ("control", "check"):
            raise ValueError(f"unknown GCP role {self.role!r}")


def write_gcps(path, gcps) -> None:
    lines = []
    for g in gcps:
        coords = " ".join(_F % v for v in g.world)
        lines.append(f"GCP {g.gcp_id} {coords} {g.role}")
    for g in gcps:
        for img, px in g.observations:
            vals = " ".join(_F % v for v in np.asarray(px, dtype=float))
            lines.append(f"GCPOBS {g.gcp_id} {img} {vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_gcps(path):
    gcps = {}
    with open(path) as fh:
        for line in fh:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "GCP":
                gid = int(tok[1])
                gcps[gid] = GcpRecord(
                    gid, [float(v) for v in tok[2:5]], [], tok[5]
                )
            elif tok[0] == "GCPOBS":
                gid = int(tok[1])
                gcps[gid].observations.append(
                    (int(tok[2]), np.array([float(tok[3]), float(tok[4])]))
                )
            else:
                raise ValueError(f"unknown record {tok[0]!r}")
    return [gcps[g] for g in sorted(gcps)]


@dataclass
class GeoReport:
    """Per-check-point absolute residuals (meters) and per-axis statistics."""

    residuals: list = field(default_factory=list)  # (gcp_id, |dx|, |dy|, |dz|)
    stats: dict = field(default_factory=dict)  # 'max'|'mean'|'std' -> 3-vector

    def format_table(self) -> str:
        rows = [f"{'CP':>6} {'|X| (m)':>12} {'|Y| (m)':>12} {'|Z| (m)':>12}"]
        for gid, dx, dy, dz in self.residuals:
            rows.append(f"{gid:>6} {dx:>12.6f} {dy:>12.6f} {dz:>12.6f}")
        for name in ("max", "mean", "std"):
            v = self.stats[name]
            rows.append(
                f"{name.capitalize():>6} {v[0]:>12.6f} {v[1]:>12.6f} {v[2]:>12.6f}"
            )
        return "\n".join(rows)


def triangulate_gcp(model: Reconstruction, gcp: GcpRecord, min_tri_angle_deg=1.0):
    """GCP position in the model frame from its image observations."""
    data = []
    for img, px in gcp.observations:
        if img in model.cameras:
            intr, pose = model.cameras[img]
            data.append((intr, pose, np.asarray(px, dtype=float)))
    if len(data) < 2:
        return None
    try:
        return triangulate(data, min_tri_angle_deg)
    except (DegenerateGeometryError, EstimationFailure):
        return None


def georeference(model: Reconstruction, gcps, features, ba_opts: BaOptions = None):
    """Map the model into the survey frame and refine with fixed controls.

    Returns (geo-referenced Reconstruction, GeoReport over check points).
    Raises ValueError with fewer than 3 triangulable control points and
    DegenerateGeometryError if they are collinear.
    """
    controls = [g for g in gcps if g.role == "control"]
    checks = [g for g in gcps if g.role == "check"]
    model_pos = {}
    for g in controls:
        X = triangulate_gcp(model, g)
        if X is not None:
            model_pos[g.gcp_id] = X
    usable = [g for g in controls if g.gcp_id in model_pos]
    if len(usable) < 3:
        raise ValueError(
            f"need >=3 triangulable control points, have {len(usable)}"
        )
    src = np.array([model_pos[g.gcp_id] for g in usable])
    dst = np.array([g.world for g in usable])
    T, _ = umeyama_similarity(src, dst)

    geo = model.copy()
    for img, (intr, pose) in geo.cameras.items():
        geo.cameras[img] = (intr, transform_pose(pose, T))
    for pid, (xyz, track) in geo.points.items():
        geo.points[pid] = (T.apply(xyz).reshape(3), track)

    # constrained BA: control coordinates are fixed anchors with their own
    # image observations; negative ids keep them clear of scene points
    cameras = {i: pose for i, (_, pose) in geo.cameras.items()}
    intrinsics = {i: intr for i, (intr, _) in geo.cameras.items()}
    points = {p: xyz for p, (xyz, _) in geo.points.items()}
    observations = geo.observations(features)
    fixed_ids = set()
    for g in usable:
        pid = -1 - g.gcp_id
        points[pid] = g.world.copy()
        fixed_ids.add(pid)
        for img, px in g.observations:
            if img in cameras:
                observations.append((img, pid, np.asarray(px, dtype=float)))
    opts = ba_opts or BaOptions()
    opts = BaOptions(
        max_iterations=opts.max_iterations,
        gradient_tolerance=opts.gradient_tolerance,
        parameter_tolerance=opts.parameter_tolerance,
        fixed_point_ids=fixed_ids,
    )
    solve_bundle(cameras, intrinsics, points, observations, opts)
    for img, pose in cameras.items():
        geo.cameras[img] = (geo.cameras[img][0], pose)
    for pid in geo.points:
        geo.points[pid] = (np.asarray(points[pid], dtype=float), geo.points[pid][1])

    report = GeoReport()
    deltas = []
    for g in checks:
        X = triangulate_gcp(geo, g)
        if X is None:
            continue
        d = np.abs(X - g.world)
        report.residuals.append((g.gcp_id, float(d[0]), float(d[1]), float(d[2])))
        deltas.append(d)
    if deltas:
        arr = np.array(deltas)
        report.stats = {
            "max": arr.max(axis=0),
            "mean": arr.mean(axis=0),
            "std": arr.std(axis=0),
        }
    else:
        zero = np.zeros(3)
        report.stats = {"max": zero, "mean": zero, "std": zero}
    return geo, report
