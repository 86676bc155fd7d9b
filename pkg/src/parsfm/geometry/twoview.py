"""Two-view geometry: DLT triangulation and essential-matrix relative pose."""

from __future__ import annotations

import numpy as np

from .camera import CameraIntrinsics, CameraPose, project_rotation


class DegenerateGeometryError(Exception):
    """Raised for geometrically degenerate inputs (parallel rays, collinear sets)."""


class EstimationFailure(Exception):
    """Raised when a robust estimator cannot produce a model."""


DEFAULT_MIN_TRI_ANGLE_DEG = 2.0


def _ray_directions(intr: CameraIntrinsics, pose: CameraPose, pixel) -> np.ndarray:
    """Unit viewing ray in world coordinates."""
    n = intr.normalize(np.asarray(pixel, dtype=float))
    d = pose.rotation.T @ np.array([n[0], n[1], 1.0])
    return d / np.linalg.norm(d)


def triangulation_angle(observations) -> float:
    """Maximum pairwise angle (radians) between viewing rays."""
    rays = [_ray_directions(intr, pose, px) for intr, pose, px in observations]
    best = 0.0
    for i in range(len(rays)):
        for j in range(i + 1, len(rays)):
            c = np.clip(abs(np.dot(rays[i], rays[j])), -1.0, 1.0)
            best = max(best, np.arccos(c))
    return best


def triangulate(observations, min_tri_angle_deg: float = DEFAULT_MIN_TRI_ANGLE_DEG):
    """Linear least-squares intersection of >=2 viewing rays.

    observations: list of (CameraIntrinsics, CameraPose, pixel 2-vector).
    Raises DegenerateGeometryError when the maximum pairwise ray angle is
    below ``min_tri_angle_deg`` and EstimationFailure when the solution lies
    behind any camera.
    """
    if len(observations) < 2:
        raise ValueError("need at least 2 observations")
    if triangulation_angle(observations) < np.deg2rad(min_tri_angle_deg):
        raise DegenerateGeometryError("triangulation angle below minimum")

    rows = []
    for intr, pose, px in observations:
        n = intr.normalize(np.asarray(px, dtype=float))
        P = np.hstack([pose.rotation, pose.translation.reshape(3, 1)])
        rows.append(n[0] * P[2] - P[0])
        rows.append(n[1] * P[2] - P[1])
    A = np.array(rows)
    _, _, Vt = np.linalg.svd(A)
    Xh = Vt[-1]
    if abs(Xh[3]) < 1e-14:
        raise DegenerateGeometryError("point at infinity")
    X = Xh[:3] / Xh[3]
    for intr, pose, _ in observations:
        if pose.transform(X)[0, 2] <= 0:
            raise EstimationFailure("triangulated point behind a camera")
    return X


def _eight_point_essential(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Normalized eight-point estimate of E from normalized image coords."""

    def hartley(x):
        mean = x.mean(axis=0)
        d = np.sqrt(((x - mean) ** 2).sum(axis=1)).mean()
        s = np.sqrt(2.0) / max(d, 1e-12)
        T = np.array([[s, 0, -s * mean[0]], [0, s, -s * mean[1]], [0, 0, 1]])
        xh = np.hstack([x, np.ones((len(x), 1))]) @ T.T
        return xh, T

    a, T1 = hartley(x1)
    b, T2 = hartley(x2)
    # rows: b^T E a = 0
    A = np.einsum("ni,nj->nij", b, a).reshape(len(x1), 9)
    _, _, Vt = np.linalg.svd(A)
    E = Vt[-1].reshape(3, 3)
    E = T2.T @ E @ T1
    # enforce rank-2 with equal singular values
    U, _, Vt = np.linalg.svd(E)
    E = U @ np.diag([1.0, 1.0, 0.0]) @ Vt
    return E


def _sampson_error(E: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Sampson distance in normalized coordinates."""
    h1 = np.hstack([x1, np.ones((len(x1), 1))])
    h2 = np.hstack([x2, np.ones((len(x2), 1))])
    Ex1 = h1 @ E.T
    Etx2 = h2 @ E
    num = np.einsum("ni,ni->n", h2, Ex1) ** 2
    den = Ex1[:, 0] ** 2 + Ex1[:, 1] ** 2 + Etx2[:, 0] ** 2 + Etx2[:, 1] ** 2
    return num / np.maximum(den, 1e-18)


def _decompose_essential(E: np.ndarray):
    U, _, Vt = np.linalg.svd(E)
    if np.linalg.det(U) < 0:
        U = -U
    if np.linalg.det(Vt) < 0:
        Vt = -Vt
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    R1 = U @ W @ Vt
    R2 = U @ W.T @ Vt
    t = U[:, 2]
    return [(R1, t), (R1, -t), (R2, t), (R2, -t)]


def _cheirality_counts(R, t, x1, x2):
    """Depth-positive count for pose candidate (R, t) of camera 2 w.r.t. camera 1."""
    n = len(x1)
    good = 0
    for i in range(n):
        A = np.empty((4, 4))
        P1 = np.hstack([np.eye(3), np.zeros((3, 1))])
        P2 = np.hstack([R, t.reshape(3, 1)])
        A[0] = x1[i, 0] * P1[2] - P1[0]
        A[1] = x1[i, 1] * P1[2] - P1[1]
        A[2] = x2[i, 0] * P2[2] - P2[0]
        A[3] = x2[i, 1] * P2[2] - P2[1]
        _, _, Vt = np.linalg.svd(A)
        Xh = Vt[-1]
        if abs(Xh[3]) < 1e-14:
            continue
        X = Xh[:3] / Xh[3]
        z1 = X[2]
        z2 = (R @ X + t)[2]
        if z1 > 0 and z2 > 0:
            good += 1
    return good


def estimate_relative_pose(
    matches,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    threshold_px: float = 4.0,
    confidence: float = 0.999,
    max_iterations: int = 1000,
    rng=None,
):
    """RANSAC eight-point relative pose of camera 2 w.r.t. camera 1.

    matches: (N,2,2) or list of (pixel1, pixel2) pairs, N >= 8.
    Returns (CameraPose with unit-norm translation, boolean inlier mask).
    """
    m = np.asarray(matches, dtype=float)
    if m.ndim != 3 or m.shape[1:] != (2, 2) or len(m) < 8:
        raise EstimationFailure("need at least 8 pixel-pair matches")
    rng = np.random.default_rng(rng)

    x1 = intr1.normalize(m[:, 0])
    x2 = intr2.normalize(m[:, 1])
    # Sampson threshold mapped from pixels to normalized coords
    f = 0.25 * (intr1.focal_x + intr1.focal_y + intr2.focal_x + intr2.focal_y)
    thr = (threshold_px / f) ** 2

    n = len(m)
    best_mask = None
    best_E = None
    best_count = 0
    iters = max_iterations
    it = 0
    while it < iters:
        it += 1
        idx = rng.choice(n, 8, replace=False)
        try:
            E = _eight_point_essential(x1[idx], x2[idx])
        except np.linalg.LinAlgError:
            continue
        mask = _sampson_error(E, x1, x2) < thr
        c = int(mask.sum())
        if c > best_count:
            best_count, best_mask, best_E = c, mask, E
            ratio = c / n
            if ratio > 0:
                denom = np.log(max(1e-12, 1.0 - ratio**8))
                if denom < 0:
                    iters = min(max_iterations, int(np.ceil(np.log(1 - confidence) / denom)))
    if best_mask is None or best_count < 8:
        raise EstimationFailure("no essential-matrix consensus")

    # refit on inliers until the consensus stops growing
    for _ in range(5):
        E = _eight_point_essential(x1[best_mask], x2[best_mask])
        mask = _sampson_error(E, x1, x2) < thr
        if mask.sum() < 8:
            break
        grew = mask.sum() > best_mask.sum()
        best_E, best_mask = E, mask
        if not grew:
            break

    xi1, xi2 = x1[best_mask], x2[best_mask]
    best_pose = None
    best_good = -1
    for R, t in _decompose_essential(best_E):
        good = _cheirality_counts(R, t, xi1, xi2)
        if good > best_good:
            best_good, best_pose = good, (R, t)
    if best_pose is None or best_good < 0.5 * best_mask.sum():
        raise EstimationFailure("no decomposition passes the cheirality check")
    R, t = best_pose
    t = t / np.linalg.norm(t)
    return CameraPose(project_rotation(R), t), best_mask
