"""Parallel structure-from-motion toolkit.

Reconstructs camera poses and sparse 3D points from feature matches by
extracting a weighted connected dominating set skeleton of the match graph,
partitioning the remaining scene into clusters, reconstructing skeleton and
clusters concurrently, and merging everything back together with RANSAC
similarity transforms anchored to the skeleton model.
"""

__version__ = "0.1.0"
