"""Cross-reconstruction feature mapping built from a minimal set of matches.

Only the match pairs with one image in the source reconstruction and the
other in the reference reconstruction are loaded; loaded_match_count is the
number of such pairs and doubles as the memory-consumption proxy when the
strategies are compared.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CorrespondenceGraph:
    """One-directional map (source image, keypoint) -> reference features."""

    mapping: dict = field(default_factory=dict)
    loaded_match_count: int = 0
    source_images: set = field(default_factory=set)

    def lookup(self, image_id, kp_idx):
        return self.mapping.get((image_id, kp_idx), [])


def build_correspondence_graph(source, reference, match_pairs) -> CorrespondenceGraph:
    """Load exactly the source-to-reference match pairs into a mapping."""
    src_images = source.image_ids()
    ref_images = reference.image_ids()
    cg = CorrespondenceGraph(source_images=src_images)
    for pair in match_pairs:
        a, b = pair.image_id_a, pair.image_id_b
        if a in src_images and b in ref_images:
            src_img, ref_img = a, b
            m = pair.matches
        elif b in src_images and a in ref_images:
            src_img, ref_img = b, a
            m = pair.matches[:, ::-1]
        else:
            continue
        cg.loaded_match_count += 1
        for si, ri in m:
            cg.mapping.setdefault((src_img, int(si)), []).append(
                (ref_img, int(ri))
            )
    return cg


def strategy_match_counts(source, reference, match_pairs) -> dict:
    """Loaded-pair counts of the three loading strategies.

    on_demand: only source-to-reference pairs; pairwise: every pair touching
    a source image; all_dataset: the entire match store.
    """
    src_images = source.image_ids()
    ref_images = reference.image_ids()
    on_demand = 0
    pairwise = 0
    for pair in match_pairs:
        a, b = pair.image_id_a, pair.image_id_b
        touches_src = a in src_images or b in src_images
        if touches_src:
            pairwise += 1
        if (a in src_images and b in ref_images) or (
            b in src_images and a in ref_images
        ):
            on_demand += 1
    return {
        "on_demand": on_demand,
        "pairwise": pairwise,
        "all_dataset": len(match_pairs),
    }
