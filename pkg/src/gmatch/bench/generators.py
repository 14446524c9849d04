"""Synthetic instances built from published cost formulas, plus a random oracle suite."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ..errors import PreconditionError
from ..model import DUMMY, Geometry, Labeling, Problem


def knn_pairs(points: np.ndarray, k: int = 5) -> list[tuple[int, int]]:
    """Symmetrized k-nearest-neighbor adjacency as sorted (u, v) pairs with u < v."""
    n = len(points)
    if n < 2:
        return []
    k = min(k, n - 1)
    _, idx = cKDTree(points).query(points, k + 1)
    pairs = {(min(u, v), max(u, v)) for u in range(n) for v in idx[u, 1:].tolist() if u != v}
    return sorted(pairs)


def _geometry(left, right, e1, e2) -> Geometry:
    return Geometry(
        tuple((k, float(x), float(y)) for k, (x, y) in enumerate(left)),
        tuple((k, float(x), float(y)) for k, (x, y) in enumerate(right)),
        tuple(e1), tuple(e2),
    )


def _perturb(points: np.ndarray, rng: np.random.Generator, angle: float, noise: float) -> np.ndarray:
    theta = rng.uniform(-angle, angle)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    center = points.mean(axis=0)
    shift = rng.uniform(-20.0, 20.0, size=2)
    return (points - center) @ rot.T + center + shift + rng.normal(0.0, noise, points.shape)


def gen_house_style(n: int, seed: int = 0, k: int = 5, noise: float = 5.0,
                    angle: float = 0.25, extent: float = 400.0) -> Problem:
    """Wide-baseline style instance: ``c[is,jl] = -exp(-(d_ij - d_sl)^2 / 2500)``.

    Landmarks are uniform in a square of side ``extent``; the second cloud is
    a rotated, shifted and noisy copy, so the identity is the ground truth.
    Pairwise terms exist for node pairs adjacent in the first kNN graph and
    label pairs adjacent in the second; all ``n * n`` assignments are
    candidates with zero unary cost.
    """
    if n < 3:
        raise PreconditionError("gen_house_style needs n >= 3")
    rng = np.random.default_rng(seed)
    left = rng.uniform(0.0, extent, size=(n, 2))
    right = _perturb(left, rng, angle, noise)
    e1, e2 = knn_pairs(left, k), knn_pairs(right, k)
    d1, d2 = cdist(left, left), cdist(right, right)

    assignments = [(i, s, 0.0) for i in range(n) for s in range(n)]
    edges = []
    for i, j in e1:
        for s, l in e2:
            for a, b in ((s, l), (l, s)):
                cost = -np.exp(-((d1[i, j] - d2[a, b]) ** 2) / 2500.0)
                edges.append((i * n + a, j * n + b, float(cost)))
    return Problem(n, n, assignments, edges, _geometry(left, right, e1, e2))


def gen_caltech_style(n_nodes: int, n_labels: int, outliers: int = 0, seed: int = 0,
                      candidates: int = 5, noise: float = 4.0, extent: float = 300.0,
                      k: int = 5) -> Problem:
    """Feature-matching style instance: ``c[is,jl] = -max(50 - d, 0)``.

    ``d`` is the mutual projection error ``|d_ij - d_sl|`` of the two point
    pairs.  The first ``n_nodes - outliers`` nodes are inliers mapped to the
    label of the same index; outlier nodes get fresh random positions.  Each
    node keeps its ``candidates`` nearest labels (after a random similarity
    alignment), always including its ground-truth label for inliers.  Unaries
    are zero; pairwise terms vanish beyond the truncation at 50.
    """
    if n_labels < n_nodes:
        raise PreconditionError("gen_caltech_style needs n_labels >= n_nodes")
    if not 0 <= outliers <= n_nodes:
        raise PreconditionError("outliers must lie in [0, n_nodes]")
    rng = np.random.default_rng(seed)
    right = rng.uniform(0.0, extent, size=(n_labels, 2))
    inl = n_nodes - outliers
    left = np.empty((n_nodes, 2))
    left[:inl] = _perturb(right[:inl], rng, 0.2, noise) if inl else left[:inl]
    left[inl:] = rng.uniform(0.0, extent, size=(outliers, 2))
    d1, d2 = cdist(left, left), cdist(right, right)

    near = np.argsort(cdist(left, right), axis=1)[:, :candidates]
    assignments = []
    for i in range(n_nodes):
        labels = set(near[i].tolist())
        if i < inl:
            labels.add(i)
        assignments += [(i, s, 0.0) for s in sorted(labels)]
    p0 = Problem(n_nodes, n_labels, assignments)

    e1 = knn_pairs(left, k)
    edges = []
    for i, j in e1:
        for a in p0.node_assignments[i].tolist():
            for b in p0.node_assignments[j].tolist():
                s, l = int(p0.labels[a]), int(p0.labels[b])
                if s == l:
                    continue
                cost = -max(50.0 - abs(d1[i, j] - d2[s, l]), 0.0)
                if cost < 0:
                    edges.append((a, b, cost))
    return Problem(n_nodes, n_labels, assignments, edges,
                   _geometry(left, right, e1, knn_pairs(right, k)))


def caltech_ground_truth(n_nodes: int, outliers: int) -> dict[int, int]:
    return {i: i for i in range(n_nodes - outliers)}


def random_problem(seed: int, max_nodes: int = 6, max_labels: int = 6) -> Problem:
    """Small random instance with mixed-sign costs and mixed candidate/edge density."""
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(2, max_nodes + 1))
    nl = int(rng.integers(2, max_labels + 1))
    density = rng.uniform(0.35, 1.0)
    assignments = []
    for i in range(nv):
        for s in range(nl):
            if rng.random() < density:
                assignments.append((i, s, float(np.round(rng.normal(-0.5, 2.0), 3))))
    p0 = Problem(nv, nl, assignments)
    edge_density = rng.uniform(0.1, 0.8)
    edges = []
    for a in range(p0.num_assignments):
        for b in range(a + 1, p0.num_assignments):
            if p0.nodes[a] != p0.nodes[b] and p0.labels[a] != p0.labels[b] \
                    and rng.random() < edge_density:
                edges.append((a, b, float(np.round(rng.normal(-0.5, 2.0), 3))))
    return Problem(nv, nl, assignments, edges)


def random_suite(count: int = 100, seed: int = 0, max_nodes: int = 6, max_labels: int = 6
                 ) -> list[tuple[str, Problem]]:
    base = np.random.default_rng(seed).integers(0, 2**31, size=count)
    return [(f"rand{k:03d}", random_problem(int(s), max_nodes, max_labels)) for k, s in enumerate(base)]


def identity_labeling(n: int) -> Labeling:
    return tuple(range(n))


def truth_labeling(n_nodes: int, truth: dict[int, int]) -> Labeling:
    return tuple(truth.get(i, DUMMY) for i in range(n_nodes))
