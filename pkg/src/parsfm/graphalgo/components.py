"""Connected components of a match graph (iterative BFS)."""

from __future__ import annotations

from collections import deque


def connected_components(graph):
    """Partition graph vertices into maximal connected sets.

    Returns a list of vertex sets ordered by their smallest member.
    """
    adj = graph.adjacency()
    seen = set()
    comps = []
    for start in sorted(graph.vertices):
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u, _ in adj[v]:
                if u not in seen:
                    seen.add(u)
                    comp.add(u)
                    queue.append(u)
        comps.append(comp)
    return comps
