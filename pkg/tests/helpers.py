"""Shared synthetic-scene helpers for the test suite."""

import numpy as np

from parsfm.geometry import CameraIntrinsics, CameraPose


def default_intrinsics(width=1000, height=800, focal=900.0):
    return CameraIntrinsics(focal, focal, width / 2.0, height / 2.0, width, height)


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)):
    """World-to-camera pose with +z looking from eye toward target."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, dtype=float)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd])  # rows: camera axes in world coords
    return CameraPose(R, -R @ eye)


def random_rotation(rng):
    A = rng.normal(size=(3, 3))
    Q, _ = np.linalg.qr(A)
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def ring_cameras(n, radius=10.0, height=4.0, target=(0.0, 0.0, 0.0)):
    poses = []
    target = np.asarray(target, dtype=float)
    for k in range(n):
        a = 2 * np.pi * k / n
        eye = target + np.array([radius * np.cos(a), radius * np.sin(a), height])
        poses.append(look_at_pose(eye, target))
    return poses


def make_scene(
    n_cams=10,
    n_pts=80,
    noise=0.0,
    seed=0,
    radius=10.0,
    ring_k=2,
    offset=(0.0, 0.0, 0.0),
    id_offset=0,
    pt_offset=0,
):
    """Ring of cameras around a point cloud; every camera sees every point.

    Keypoint index k of every image observes world point k + pt_offset, so
    ground-truth correspondences are trivial to emit.
    """
    from parsfm.geometry import project
    from parsfm.matchgraph import FeatureSet, MatchPair

    rng = np.random.default_rng(seed)
    pts = rng.uniform(-3.0, 3.0, size=(n_pts, 3))
    pts[:, 2] *= 0.5
    pts += np.asarray(offset, dtype=float)
    poses = ring_cameras(n_cams, radius=radius, target=offset)
    intr = default_intrinsics()
    features = {}
    intrinsics = {}
    gt_poses = {}
    for i, pose in enumerate(poses):
        img = i + id_offset
        px = np.array([project(intr, pose, p) for p in pts])
        px += rng.normal(0.0, noise, size=px.shape) if noise else 0.0
        kp = np.hstack([px, np.ones((n_pts, 1))])
        features[img] = FeatureSet(img, kp, np.zeros((n_pts, 2)))
        intrinsics[img] = intr
        gt_poses[img] = pose
    pairs = []
    for i in range(n_cams):
        for j in range(i + 1, n_cams):
            if min(j - i, n_cams - (j - i)) <= ring_k:
                m = np.stack([np.arange(n_pts), np.arange(n_pts)], axis=1)
                pairs.append(MatchPair(i + id_offset, j + id_offset, m))
    return {
        "images": [i + id_offset for i in range(n_cams)],
        "points": pts,
        "pt_offset": pt_offset,
        "features": features,
        "intrinsics": intrinsics,
        "gt_poses": gt_poses,
        "pairs": pairs,
    }
