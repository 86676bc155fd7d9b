"""Descriptor matching and geometric verification of candidate pairs."""

from __future__ import annotations

import numpy as np

from ..geometry import EstimationFailure, estimate_relative_pose
from .types import MatchPair

RATIO_TEST = 0.8
MIN_VERIFY_MATCHES = 8


def mutual_nearest_matches(desc_a: np.ndarray, desc_b: np.ndarray, ratio: float = RATIO_TEST):
    """Mutual nearest neighbours passing Lowe's ratio test, as (M,2) indices."""
    if len(desc_a) == 0 or len(desc_b) == 0:
        return np.zeros((0, 2), dtype=int)
    d2 = (
        (desc_a**2).sum(axis=1)[:, None]
        + (desc_b**2).sum(axis=1)[None, :]
        - 2.0 * desc_a @ desc_b.T
    )
    nn_ab = d2.argmin(axis=1)
    nn_ba = d2.argmin(axis=0)
    out = []
    for i, j in enumerate(nn_ab):
        if nn_ba[j] != i:
            continue
        if d2.shape[1] >= 2:
            row = d2[i].copy()
            best = row[j]
            row[j] = np.inf
            second = row.min()
            if best > (ratio**2) * second:
                continue
        out.append((i, int(j)))
    return np.array(out, dtype=int).reshape(-1, 2)


def verify_matches(
    candidates,
    features,
    intrinsics,
    ratio: float = RATIO_TEST,
    threshold_px: float = 4.0,
    rng_seed: int = 0,
):
    """Match descriptors of candidate pairs and keep geometric inliers.

    candidates: iterable of (image_id_a, image_id_b); features/intrinsics are
    dicts keyed by image id. Pairs that cannot be verified are dropped.
    """
    verified = []
    for a, b in candidates:
        fa, fb = features[a], features[b]
        m = mutual_nearest_matches(fa.descriptors, fb.descriptors, ratio)
        if len(m) < MIN_VERIFY_MATCHES:
            continue
        pix = np.stack(
            [fa.keypoints[m[:, 0], :2], fb.keypoints[m[:, 1], :2]], axis=1
        )
        rng = np.random.default_rng((rng_seed, a, b))
        try:
            _, inliers = estimate_relative_pose(
                pix,
                intrinsics[a],
                intrinsics[b],
                threshold_px=threshold_px,
                max_iterations=5000,
                rng=rng,
            )
        except EstimationFailure:
            continue
        if inliers.sum() < MIN_VERIFY_MATCHES:
            continue
        verified.append(MatchPair(a, b, m[inliers]))
    return verified
