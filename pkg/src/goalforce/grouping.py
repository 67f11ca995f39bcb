"""Group detection by per-frame DBSCAN with temporal persistence.

Two pedestrians form a group for a window when they share a cluster in more
than ``sigma`` of its observed frames. Co-membership is counted frame by
frame, so cluster labels never need to be matched across frames.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence, TextIO

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1
_UNSEEN = -2


class ClusterLabel(NamedTuple):
    frame_index: int
    agent_id: int
    label: int


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Label ``(n, 2)`` points with cluster ids ``0, 1, ...`` or ``NOISE``.

    The eps-neighborhood is closed (``distance <= eps``) and includes the
    point itself. Points are visited in index order and clusters are grown
    breadth-first, so a border point reachable from two clusters joins the one
    created first.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    labels = np.full(n, _UNSEEN, dtype=int)
    if n == 0:
        return labels
    neighbors = cKDTree(pts).query_ball_point(pts, eps)
    cluster = 0
    for i in range(n):
        if labels[i] != _UNSEEN:
            continue
        if len(neighbors[i]) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = deque(neighbors[i])
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster
            if labels[j] != _UNSEEN:
                continue
            labels[j] = cluster
            if len(neighbors[j]) >= min_pts:
                queue.extend(neighbors[j])
        cluster += 1
    return labels


def dbscan_frame(frame, eps: float = 1.0, min_pts: int = 2) -> list[ClusterLabel]:
    """Cluster the agents of one frame, iterating in ascending agent id."""
    labels = dbscan(frame.positions, eps, min_pts)
    return [ClusterLabel(frame.frame_index, int(a), int(l)) for a, l in zip(frame.ids, labels)]


@dataclass(frozen=True)
class GroupAssignment:
    pairs: frozenset
    sigma: int
    co_cluster_frames: Mapping[tuple[int, int], int] = field(default_factory=dict, compare=False)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (min(a, b), max(a, b)) in self.pairs


def detect_groups(observed_frames: Sequence, eps: float = 1.0, min_pts: int = 2, sigma: int = 4) -> GroupAssignment:
    """Pairs sharing a non-noise cluster in strictly more than ``sigma`` frames."""
    counts: dict[tuple[int, int], int] = {}
    for frame in observed_frames:
        members: dict[int, list[int]] = {}
        for lab in dbscan_frame(frame, eps, min_pts):
            if lab.label != NOISE:
                members.setdefault(lab.label, []).append(lab.agent_id)
        for ids in members.values():
            for a, b in combinations(sorted(ids), 2):
                counts[(a, b)] = counts.get((a, b), 0) + 1
    pairs = frozenset(p for p, c in counts.items() if c > sigma)
    return GroupAssignment(pairs, sigma, counts)


def group_mask(assignment: GroupAssignment) -> Callable[[int, int], bool]:
    """Predicate that is True when the repulsion between two agents is removed."""
    pairs = assignment.pairs

    def mask(a: int, b: int) -> bool:
        return (a, b) in pairs or (b, a) in pairs

    return mask


def window_groups(window, eps: float = 1.0, min_pts: int = 2, sigma: int = 4) -> GroupAssignment:
    return detect_groups(window.observed_frames, eps, min_pts, sigma)


def write_groups_csv(windows: Iterable, assignments: Mapping[int, GroupAssignment], stream: TextIO, header: bool = True) -> None:
    """One row per agent pair that co-clustered at least once in a window."""
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(["scene", "window_id", "agent_a", "agent_b", "co_cluster_frames", "grouped"])
    for w in windows:
        a = assignments[w.window_id]
        for (p, q), n in sorted(a.co_cluster_frames.items()):
            writer.writerow([w.scene_name, w.window_id, p, q, n, (p, q) in a.pairs])
