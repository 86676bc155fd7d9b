"""DLT camera resection (PnP) inside RANSAC with nonlinear refinement."""

from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares

from .camera import CameraIntrinsics, CameraPose, angle_axis_to_matrix, project_rotation
from .twoview import EstimationFailure


def _dlt_pose(X: np.ndarray, xn: np.ndarray) -> CameraPose:
    """Direct linear transform from >=6 world/normalized-image correspondences."""
    n = len(X)
    A = np.zeros((2 * n, 12))
    for i in range(n):
        x, y = xn[i]
        A[2 * i, 0:3] = X[i]
        A[2 * i, 3] = 1.0
        A[2 * i, 8:11] = -x * X[i]
        A[2 * i, 11] = -x
        A[2 * i + 1, 4:7] = X[i]
        A[2 * i + 1, 7] = 1.0
        A[2 * i + 1, 8:11] = -y * X[i]
        A[2 * i + 1, 11] = -y
    _, s, Vt = np.linalg.svd(A)
    if s[-2] < 1e-10 * max(s[0], 1.0):
        raise EstimationFailure("degenerate (coplanar/collinear) correspondence set")
    P = Vt[-1].reshape(3, 4)
    M = P[:, :3]
    # fix sign so depths come out positive for the majority
    depths = X @ M[2] + P[2, 3]
    if np.median(depths) < 0:
        P = -P
        M = P[:, :3]
    scale = np.linalg.det(M)
    if abs(scale) < 1e-14:
        raise EstimationFailure("singular projection matrix")
    s3 = np.cbrt(scale)
    M = M / s3
    t = P[:, 3] / s3
    return CameraPose(project_rotation(M), t)


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Normalized 2D DLT homography mapping src (n,2) onto dst (n,2)."""

    def normalize(p):
        m = p.mean(axis=0)
        d = np.sqrt(((p - m) ** 2).sum(axis=1)).mean()
        s = np.sqrt(2.0) / max(d, 1e-12)
        T = np.array([[s, 0.0, -s * m[0]], [0.0, s, -s * m[1]], [0.0, 0.0, 1.0]])
        return (p - m) * s, T

    sp, Ts = normalize(src)
    dp, Td = normalize(dst)
    n = len(src)
    M = np.zeros((2 * n, 9))
    for i in range(n):
        u, v = sp[i]
        x, y = dp[i]
        M[2 * i] = [u, v, 1.0, 0.0, 0.0, 0.0, -x * u, -x * v, -x]
        M[2 * i + 1] = [0.0, 0.0, 0.0, u, v, 1.0, -y * u, -y * v, -y]
    _, _, Vt = np.linalg.svd(M)
    return np.linalg.inv(Td) @ Vt[-1].reshape(3, 3) @ Ts


def _planar_pose(X: np.ndarray, xn: np.ndarray) -> CameraPose:
    """Pose from >=4 (near-)coplanar correspondences.

    The 11-parameter DLT is rank-deficient for coplanar points; here the
    points are expressed in an orthonormal basis of their best-fit plane and
    the pose is recovered from the plane-to-image homography, whose first two
    columns are the rotated plane axes.
    """
    c = X.mean(axis=0)
    _, _, Vt = np.linalg.svd(X - c)
    if np.linalg.det(Vt) < 0:
        Vt = Vt.copy()
        Vt[2] = -Vt[2]
    uv = (X - c) @ Vt[:2].T
    H = _homography(uv, xn)
    if np.median(uv @ H[2, :2] + H[2, 2]) < 0:
        H = -H  # choose the sign putting the points in front of the camera
    lam = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    r1 = lam * H[:, 0]
    r2 = lam * H[:, 1]
    R = project_rotation(np.stack([r1, r2, np.cross(r1, r2)], axis=1)) @ Vt
    t = lam * H[:, 2] - R @ c
    return CameraPose(R, t)


def _sample_pose(X: np.ndarray, xn: np.ndarray) -> CameraPose:
    """DLT pose, switching to the planar branch for flat correspondence sets."""
    s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
    if s[2] < 0.05 * s[0]:
        return _planar_pose(X, xn)
    return _dlt_pose(X, xn)


def _refine_pose(pose: CameraPose, X, px, intr: CameraIntrinsics) -> CameraPose:
    """Per-camera Levenberg-Marquardt on reprojection error."""
    R0, t0 = pose.rotation, pose.translation

    def residual(p):
        R = angle_axis_to_matrix(p[:3]) @ R0
        cam = X @ R.T + p[3:]
        z = np.maximum(cam[:, 2], 1e-9)
        u = intr.focal_x * cam[:, 0] / z + intr.principal_x
        v = intr.focal_y * cam[:, 1] / z + intr.principal_y
        return np.concatenate([u - px[:, 0], v - px[:, 1]])

    sol = least_squares(residual, np.concatenate([np.zeros(3), t0]), method="lm")
    R = project_rotation(angle_axis_to_matrix(sol.x[:3]) @ R0)
    return CameraPose(R, sol.x[3:])


def resect_camera(
    correspondences,
    intr: CameraIntrinsics,
    threshold_px: float = 4.0,
    confidence: float = 0.999,
    max_iterations: int = 500,
    rng=None,
):
    """Estimate a camera pose from 3D-point/pixel correspondences.

    correspondences: list of (point3, pixel2). Returns (CameraPose, inlier mask).
    Raises EstimationFailure for <6 correspondences or no consensus.
    """
    if len(correspondences) < 6:
        raise EstimationFailure("need at least 6 correspondences")
    X = np.array([np.asarray(p, dtype=float).reshape(3) for p, _ in correspondences])
    px = np.array([np.asarray(q, dtype=float).reshape(2) for _, q in correspondences])
    xn = intr.normalize(px)
    rng = np.random.default_rng(rng)
    n = len(X)

    def reproj_errors(pose):
        cam = pose.transform(X)
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = intr.focal_x * cam[:, 0] / z + intr.principal_x
            v = intr.focal_y * cam[:, 1] / z + intr.principal_y
        err = np.hypot(u - px[:, 0], v - px[:, 1])
        err[z <= 0] = np.inf
        return err

    best_mask = None
    best_count = 0
    iters = max_iterations
    it = 0
    while it < iters:
        it += 1
        idx = rng.choice(n, 6, replace=False)
        try:
            pose = _sample_pose(X[idx], xn[idx])
        except (EstimationFailure, np.linalg.LinAlgError, ValueError):
            continue
        mask = reproj_errors(pose) < threshold_px
        c = int(mask.sum())
        if c > best_count:
            best_count, best_mask = c, mask
            ratio = c / n
            denom = np.log(max(1e-12, 1.0 - ratio**6))
            if denom < 0:
                iters = min(max_iterations, int(np.ceil(np.log(1 - confidence) / denom)))
    if best_mask is None or best_count < 6:
        raise EstimationFailure("no resection consensus")

    try:
        pose = _sample_pose(X[best_mask], xn[best_mask])
    except (EstimationFailure, np.linalg.LinAlgError, ValueError):
        raise EstimationFailure("degenerate inlier set")
    pose = _refine_pose(pose, X[best_mask], px[best_mask], intr)
    mask = reproj_errors(pose) < threshold_px
    if mask.sum() < 6:
        raise EstimationFailure("refined pose lost consensus")
    return pose, mask
