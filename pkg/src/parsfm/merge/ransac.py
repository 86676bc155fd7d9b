"""Similarity estimation between reconstructions with a bi-directional
reprojection residual."""

from __future__ import annotations

import numpy as np

from ..geometry import (
    DegenerateGeometryError,
    SimilarityTransform,
    umeyama_similarity,
)

DEFAULT_MERGE_THRESHOLD_PX = 1.8
DEFAULT_MIN_INLIER_RATIO = 0.2


class MergeFailure(Exception):
    """Raised when two reconstructions cannot be aligned."""


def _observation_data(recon, pid, features):
    """(rotations (m,3,3), translations (m,3), fx fy cx cy (m,), pixels (m,2))."""
    _, track = recon.points[pid]
    R, t, K, px = [], [], [], []
    for img, kp in track.observations:
        intr, pose = recon.cameras[img]
        R.append(pose.rotation)
        t.append(pose.translation)
        K.append([intr.focal_x, intr.focal_y, intr.principal_x, intr.principal_y])
        px.append(features[img].keypoints[kp, :2])
    return np.array(R), np.array(t), np.array(K), np.array(px)


def _side_error_sq(R, t, K, px, X):
    """Sum of squared reprojection errors of one world point; inf if any
    camera sees it behind the lens."""
    cam = R @ X + t
    z = cam[:, 2]
    if np.any(z <= 0):
        return np.inf
    u = K[:, 0] * cam[:, 0] / z + K[:, 2]
    v = K[:, 1] * cam[:, 1] / z + K[:, 3]
    return float(((u - px[:, 0]) ** 2 + (v - px[:, 1]) ** 2).sum())


def transform_residual(pair, T: SimilarityTransform, source, reference, features):
    """Bi-directional RMS reprojection error of one common point pair.

    Projects the transformed source point into the reference cameras and the
    inverse-transformed reference point into the source cameras:
        r^2 = (sum_ref + sum_src) / (m + l)
    Any behind-camera projection makes the residual +inf.
    """
    spid, rpid = pair
    s_pos = source.points[spid][0]
    r_pos = reference.points[rpid][0]
    Rr, tr, Kr, pxr = _observation_data(reference, rpid, features)
    Rs, ts, Ks, pxs = _observation_data(source, spid, features)
    fwd = _side_error_sq(Rr, tr, Kr, pxr, T.apply(s_pos))
    bwd = _side_error_sq(Rs, ts, Ks, pxs, T.inverse().apply(r_pos))
    total = fwd + bwd
    if not np.isfinite(total):
        return np.inf
    return float(np.sqrt(total / (len(pxr) + len(pxs))))


def ransac_similarity(
    common,
    source,
    reference,
    features,
    threshold_px: float = DEFAULT_MERGE_THRESHOLD_PX,
    confidence: float = 0.999,
    max_iterations: int = 10000,
    min_inlier_ratio: float = DEFAULT_MIN_INLIER_RATIO,
    rng=None,
):
    """Robust similarity from common point pairs.

    Minimal sample 3, model by closed-form alignment, scoring by the
    bi-directional residual. Returns (SimilarityTransform, inlier mask, mse).
    Raises MergeFailure when no acceptable consensus exists.
    """
    n = len(common.pairs)
    if n < 3:
        raise MergeFailure(f"only {n} common point pairs")
    rng = np.random.default_rng(rng)
    src_pos = np.array([source.points[s][0] for s, _ in common.pairs])
    ref_pos = np.array([reference.points[r][0] for _, r in common.pairs])
    # per-pair observation arrays, gathered once
    obs = [
        (
            _observation_data(reference, r, features),
            _observation_data(source, s, features),
        )
        for s, r in common.pairs
    ]

    def residuals(T):
        Tin = T.inverse()
        s_mapped = T.apply(src_pos)
        r_mapped = Tin.apply(ref_pos)
        out = np.empty(n)
        for i, ((Rr, tr, Kr, pxr), (Rs, ts, Ks, pxs)) in enumerate(obs):
            total = _side_error_sq(Rr, tr, Kr, pxr, s_mapped[i]) + _side_error_sq(
                Rs, ts, Ks, pxs, r_mapped[i]
            )
            out[i] = np.sqrt(total / (len(pxr) + len(pxs))) if np.isfinite(total) else np.inf
        return out

    best_mask = None
    best_count = 0
    iters = max_iterations
    it = 0
    while it < iters:
        it += 1
        idx = rng.choice(n, 3, replace=False)
        try:
            T, _ = umeyama_similarity(src_pos[idx], ref_pos[idx])
        except DegenerateGeometryError:
            continue
        mask = residuals(T) <= threshold_px
        c = int(mask.sum())
        if c > best_count:
            best_count, best_mask = c, mask
            ratio = c / n
            denom = np.log(max(1e-12, 1.0 - ratio**3))
            if denom < 0:
                iters = min(
                    max_iterations, int(np.ceil(np.log(1 - confidence) / denom))
                )
    if best_mask is None or best_count < 3:
        raise MergeFailure("no similarity consensus")

    # final re-estimate on the inliers, then reclassify
    for _ in range(3):
        try:
            T, mse = umeyama_similarity(src_pos[best_mask], ref_pos[best_mask])
        except DegenerateGeometryError:
            raise MergeFailure("degenerate inlier set")
        mask = residuals(T) <= threshold_px
        if mask.sum() < 3:
            raise MergeFailure("refined transform lost consensus")
        grew = mask.sum() > best_mask.sum()
        best_mask = mask
        if not grew:
            break
    if best_mask.sum() / n < min_inlier_ratio:
        raise MergeFailure(
            f"inlier ratio {best_mask.sum() / n:.3f} below {min_inlier_ratio}"
        )
    return T, best_mask, mse
