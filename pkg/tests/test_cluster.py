import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autobss.cluster import Clustering, kmeans, representatives, schedule
from autobss.errors import AllEvaluated, InvalidK


def test_schedule_published_values():
    assert schedule(1, 10000) == 16
    assert schedule(2, 10000) == 160
    assert schedule(3, 10000) == 1000
    assert schedule(4, 10000) == 10000
    assert schedule(5, 10000) == 10000  # schedule saturates at N


def test_schedule_clamped_to_batch_and_n():
    assert schedule(3, 100) == 16  # N/10 = 10 < batch_size
    assert schedule(1, 10) == 10  # fewer candidates than the batch
    with pytest.raises(ValueError):
        schedule(0, 100)


def test_invalid_k(rng):
    pts = rng.normal(size=(5, 2))
    with pytest.raises(InvalidK):
        kmeans(pts, 0, rng)
    with pytest.raises(InvalidK):
        kmeans(pts, 6, rng)


def test_k_equals_n_short_circuit(rng):
    pts = rng.normal(size=(7, 3))
    c = kmeans(pts, 7, rng)
    assert c.inertia == 0.0
    np.testing.assert_array_equal(c.centroids, pts)
    np.testing.assert_array_equal(c.assignment, np.arange(7))


def test_recovers_separated_blobs(rng):
    a = rng.normal(size=(30, 2)) + [0, 0]
    b = rng.normal(size=(30, 2)) + [100, 100]
    pts = np.vstack([a, b])
    c = kmeans(pts, 2, np.random.default_rng(1))
    labels = c.assignment
    assert len(set(labels[:30])) == 1
    assert len(set(labels[30:])) == 1
    assert labels[0] != labels[30]


def test_deterministic_given_rng():
    pts = np.random.default_rng(2).normal(size=(100, 4))
    a = kmeans(pts, 10, np.random.default_rng(3))
    b = kmeans(pts, 10, np.random.default_rng(3))
    np.testing.assert_array_equal(a.assignment, b.assignment)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    assert a.inertia == b.inertia


def test_duplicate_points_keep_k_clusters(rng):
    pts = np.vstack([np.zeros((8, 2)), np.ones((2, 2))])
    c = kmeans(pts, 3, rng)
    assert c.k == 3
    assert len(c.centroids) == 3
    assert c.inertia >= 0.0


def test_inertia_matches_assignment(rng):
    pts = rng.normal(size=(50, 3))
    c = kmeans(pts, 5, rng)
    expect = sum(
        float(np.sum((pts[i] - c.centroids[c.assignment[i]]) ** 2))
        for i in range(len(pts)))
    assert c.inertia == pytest.approx(expect)
    # each point sits in its nearest cluster
    d = np.sum((pts[:, None, :] - c.centroids[None]) ** 2, axis=2)
    np.testing.assert_array_equal(c.assignment, np.argmin(d, axis=1))


def test_representatives_nearest_member(rng):
    pts = rng.normal(size=(40, 2))
    c = kmeans(pts, 4, rng)
    reps = representatives(c, pts)
    assert len(reps) == 4
    for rep in reps:
        j = c.assignment[rep]
        members = np.flatnonzero(c.assignment == j)
        d = np.sum((pts[members] - c.centroids[j]) ** 2, axis=1)
        assert rep == members[np.argmin(d)]


def test_representatives_skip_evaluated(rng):
    pts = rng.normal(size=(40, 2))
    c = kmeans(pts, 4, rng)
    first = representatives(c, pts)
    second = representatives(c, pts, evaluated=set(first))
    assert not set(first) & set(second)
    # a fully evaluated cluster is dropped rather than served twice
    j = c.assignment[first[0]]
    evaluated = set(np.flatnonzero(c.assignment == j).tolist())
    reps = representatives(c, pts, evaluated=evaluated)
    assert all(c.assignment[r] != j for r in reps)


def test_all_evaluated_raises(rng):
    pts = rng.normal(size=(10, 2))
    c = kmeans(pts, 3, rng)
    with pytest.raises(AllEvaluated):
        representatives(c, pts, evaluated=set(range(10)))


@given(st.integers(1, 30), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_representatives_unique_and_unevaluated(k, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(30, 3))
    c = kmeans(pts, k, rng)
    evaluated = set(int(i) for i in rng.choice(30, size=10, replace=False))
    try:
        reps = representatives(c, pts, evaluated=evaluated)
    except AllEvaluated:
        return
    assert len(set(reps)) == len(reps)
    assert not set(reps) & evaluated
