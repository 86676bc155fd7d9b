"""Feature tracks: transitive closure of pair-wise matches via union-find."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Track:
    """Feature observations of one physical scene point."""

    point_id: int
    observations: list  # (image_id, keypoint_idx), one per image

    def images(self):
        return [img for img, _ in self.observations]


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        root = x
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def build_tracks(pairs) -> list:
    """Tie pair-wise matches into tracks.

    Tracks observing one image twice are inconsistent and dropped, as are
    tracks shorter than two observations.
    """
    uf = _UnionFind()
    for pair in pairs:
        a, b = pair.image_id_a, pair.image_id_b
        for ia, ib in pair.matches:
            uf.union((a, int(ia)), (b, int(ib)))

    groups = {}
    for node in uf.parent:
        groups.setdefault(uf.find(node), []).append(node)

    tracks = []
    tid = 0
    for root in sorted(groups):
        obs = sorted(groups[root])
        if len(obs) < 2:
            continue
        images = [img for img, _ in obs]
        if len(set(images)) != len(images):
            continue  # two keypoints of one image collapsed: inconsistent
        tracks.append(Track(tid, obs))
        tid += 1
    return tracks
