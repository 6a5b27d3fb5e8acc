"""Deterministic k-means over refined codes, with the growing cluster
schedule and centroid-to-candidate snapping."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import AllEvaluated, InvalidK


@dataclass(frozen=True)
class Clustering:
    k: int
    centroids: np.ndarray  # (k, m)
    assignment: np.ndarray  # (n,) cluster id per point
    inertia: float
    iterations: int


def schedule(iteration: int, n_candidates: int, batch_size: int = 16) -> int:
    """Cluster count per search iteration: 16, 160, N/10, then N."""
    if iteration < 1:
        raise ValueError("iteration is 1-based")
    if iteration == 1:
        k = 16
    elif iteration == 2:
        k = 160
    elif iteration == 3:
        k = n_candidates // 10
    else:
        k = n_candidates
    return min(n_candidates, max(k, batch_size))


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # |x - c|^2 via the expanded form; clip tiny negatives from rounding
    sq = (np.sum(points ** 2, axis=1)[:, None]
          - 2.0 * points @ centers.T
          + np.sum(centers ** 2, axis=1)[None, :])
    return np.maximum(sq, 0.0)


def _plusplus_init(points: np.ndarray, k: int,
                   rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = points[idx]
        closest = np.minimum(closest,
                             np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           max_iters: int = 100) -> Clustering:
    """Lloyd iterations from k-means++ seeds until the assignment stops
    changing; empty clusters are reseeded from the farthest point."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} outside [1, {n}]")
    if k == n:
        # every point its own centroid
        return Clustering(k=k, centroids=points.copy(),
                          assignment=np.arange(n), inertia=0.0, iterations=0)

    centers = _plusplus_init(points, k, rng)
    assignment = np.full(n, -1)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        sq = _pairwise_sq(points, centers)
        new_assignment = np.argmin(sq, axis=1)
        closest = sq[np.arange(n), new_assignment]
        for j in range(k):
            mask = new_assignment == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)
            else:
                far = int(np.argmax(closest))
                centers[j] = points[far]
                new_assignment[far] = j
                closest[far] = 0.0
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

    sq = _pairwise_sq(points, centers)
    assignment = np.argmin(sq, axis=1)
    inertia = float(sq[np.arange(n), assignment].sum())
    return Clustering(k=k, centroids=centers, assignment=assignment,
                      inertia=inertia, iterations=iterations)


def representatives(clustering: Clustering, points: np.ndarray,
                    evaluated: Optional[Set[int]] = None) -> List[int]:
    """Snap each centroid to the nearest not-yet-evaluated member of its
    cluster; clusters whose members are all evaluated are skipped.

    Returns candidate indices, one per surviving cluster.  Ties go to the
    lowest candidate index (argmin on distances is first-match).
    """
    evaluated = evaluated or set()
    points = np.asarray(points, dtype=float)
    reps: List[int] = []
    for j in range(clustering.k):
        members = np.flatnonzero(clustering.assignment == j)
        members = members[[int(i) not in evaluated for i in members]]
        if len(members) == 0:
            continue  # AllEvaluated: cluster skipped
        dist = np.sum((points[members] - clustering.centroids[j]) ** 2,
                      axis=1)
        reps.append(int(members[int(np.argmin(dist))]))
    if not reps:
        raise AllEvaluated("every cluster member already evaluated")
    return reps
