"""Edge weighting and match-graph assembly.

Edge weight blends the (log-scaled) verified match count with the overlap
ratio between matched-feature convex hulls and the image planes:
w = r_ew * log(N)/log(N_max) + (1 - r_ew) * (CH_a + CH_b)/(A_a + A_b).
"""

from __future__ import annotations

import numpy as np

from .hull import convex_hull_area
from .types import ImageMeta, MatchGraph, MatchPair

DEFAULT_MIN_MATCHES = 50
DEFAULT_EDGE_WEIGHT_RATIO = 0.5


def edge_weight(
    pair: MatchPair,
    meta_a: ImageMeta,
    meta_b: ImageMeta,
    n_max_inlier: int,
    features,
    r_ew: float = DEFAULT_EDGE_WEIGHT_RATIO,
) -> float:
    """Edge weight in [0, 1]; symmetric in the two images."""
    if n_max_inlier < 2:
        raise ValueError("n_max_inlier must be >= 2")
    if pair.inlier_count < 2:
        raise ValueError("pair must have at least 2 matches")
    if pair.inlier_count > n_max_inlier:
        raise ValueError("pair.inlier_count exceeds n_max_inlier")
    if not (0.0 <= r_ew <= 1.0):
        raise ValueError("r_ew must lie in [0, 1]")

    w_inlier = np.log(pair.inlier_count) / np.log(n_max_inlier)
    kp_a = features[pair.image_id_a].keypoints[pair.matches[:, 0], :2]
    kp_b = features[pair.image_id_b].keypoints[pair.matches[:, 1], :2]
    ch = convex_hull_area(kp_a) + convex_hull_area(kp_b)
    w_overlap = ch / (meta_a.area + meta_b.area)
    w = r_ew * w_inlier + (1.0 - r_ew) * w_overlap
    return float(min(max(w, 0.0), 1.0))


def build_match_graph(
    pairs,
    metas,
    features,
    min_matches: int = DEFAULT_MIN_MATCHES,
    r_ew: float = DEFAULT_EDGE_WEIGHT_RATIO,
) -> MatchGraph:
    """Weighted undirected graph over all images.

    Pairs with fewer than min_matches matches are dropped; the log
    normalizer N_max is taken over the surviving pairs only.
    """
    graph = MatchGraph()
    for iid in metas:
        graph.add_vertex(iid)
    survivors = [p for p in pairs if p.inlier_count >= min_matches]
    if not survivors:
        return graph
    n_max = max(p.inlier_count for p in survivors)
    for p in survivors:
        w = edge_weight(
            p, metas[p.image_id_a], metas[p.image_id_b], max(n_max, 2), features, r_ew
        )
        graph.add_edge(p.image_id_a, p.image_id_b, w, p)
    return graph
