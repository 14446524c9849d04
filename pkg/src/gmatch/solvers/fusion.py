"""Randomized greedy generation and monotone fusion of labelings."""

from __future__ import annotations

import numpy as np

from ..errors import InfeasibleError
from ..model import DUMMY, Labeling, Problem, active_ids, evaluate, is_feasible
from .base import Budget, SolverParams, Tracker


class _Field:
    """Incremental labeling state: active assignments and the pairwise field they induce.

    ``h[a]`` is the summed edge cost between ``a`` and all active assignments,
    so switching node ``i`` from ``a`` to ``b`` changes E by
    ``u[b] + h[b] - u[a] - h[a]`` (two assignments of a node share no edge).
    """

    def __init__(self, problem: Problem, unary: np.ndarray | None = None):
        self.p = problem
        self.u = problem.unary if unary is None else unary
        self.indptr, self.nbr, self.cost = problem.adjacency
        self.h = np.zeros(problem.num_assignments)
        self.node_of = problem.nodes
        self.label_of = problem.labels
        self.y = [DUMMY] * problem.num_nodes
        self.aid = [-1] * problem.num_nodes
        self.owner = [-1] * problem.num_labels

    def _toggle(self, a: int, sign: float) -> None:
        lo, hi = self.indptr[a], self.indptr[a + 1]
        self.h[self.nbr[lo:hi]] += sign * self.cost[lo:hi]

    def local(self, a: int) -> float:
        return 0.0 if a < 0 else float(self.u[a] + self.h[a])

    def assign(self, i: int, a: int) -> None:
        """Set node ``i`` to assignment ``a`` (-1 for dummy); the label must be free."""
        old = self.aid[i]
        if old >= 0:
            self._toggle(old, -1.0)
            self.owner[self.label_of[old]] = -1
        self.aid[i] = a
        if a >= 0:
            self._toggle(a, 1.0)
            s = int(self.label_of[a])
            self.owner[s] = i
            self.y[i] = s
        else:
            self.y[i] = DUMMY

    def load(self, y) -> None:
        for i, a in enumerate(self._ids_per_node(y)):
            if a >= 0:
                self.assign(i, a)

    def _ids_per_node(self, y) -> list[int]:
        index = self.p.index
        return [-1 if s == DUMMY else index[(i, s)] for i, s in enumerate(y)]


def greedy(problem: Problem, rng: np.random.Generator, epsilon: float = 0.2, k: int = 3,
           unary: np.ndarray | None = None) -> Labeling:
    """Randomized greedy labeling.

    Nodes are visited in a random order; each takes the cheapest free label
    (or dummy at cost 0) given the nodes fixed so far.  With probability
    ``epsilon`` it picks uniformly among the ``k`` cheapest options instead.
    ``unary`` overrides the unary costs (used with reparametrized costs).
    """
    f = _Field(problem, unary)
    order = rng.permutation(problem.num_nodes)
    for i in order.tolist():
        ids = problem.node_assignments[i]
        free = np.array([f.owner[s] < 0 for s in problem.labels[ids].tolist()], dtype=bool)
        ids = ids[free]
        cand = np.concatenate([[-1], ids])
        vals = np.concatenate([[0.0], f.u[ids] + f.h[ids]])
        ranked = cand[np.argsort(vals, kind="stable")]
        pick = ranked[0]
        if epsilon > 0 and rng.random() < epsilon:
            pick = ranked[rng.integers(min(k, len(ranked)))]
        f.assign(i, int(pick))
    return tuple(f.y)


def fuse(problem: Problem, y_a, y_b, eps: float = 1e-12) -> Labeling:
    """Merge two feasible labelings into one at least as good as both.

    Starts from the better parent and repeatedly switches single nodes to the
    other parent's label, or swaps a node with the current holder of that
    label when the holder can move to its own other-parent label, accepting
    only strict improvements.

    Raises:
        InfeasibleError: a parent is not a feasible labeling.
    """
    if not (is_feasible(problem, y_a) and is_feasible(problem, y_b)):
        raise InfeasibleError("fuse requires two feasible labelings")
    if evaluate(problem, y_b) < evaluate(problem, y_a):
        y_a, y_b = y_b, y_a
    f = _Field(problem)
    f.load(y_a)
    ids_a = f._ids_per_node(y_a)
    ids_b = f._ids_per_node(y_b)
    label_of = problem.labels
    n = problem.num_nodes

    def other(i: int) -> int:
        return ids_b[i] if f.aid[i] == ids_a[i] else ids_a[i]

    improved = True
    while improved:
        improved = False
        for i in range(n):
            if ids_a[i] == ids_b[i]:
                continue
            old, new = f.aid[i], other(i)
            holder = -1 if new < 0 else f.owner[label_of[new]]
            if holder < 0:
                delta = f.local(new) - f.local(old)
                if delta < -eps * max(1.0, abs(delta)):
                    f.assign(i, new)
                    improved = True
                continue
            # Label held by another node: move that node to its alternative.
            k_old, k_new = f.aid[holder], other(holder)
            if k_new == k_old:
                continue
            if k_new >= 0:
                k_label = label_of[k_new]
                if f.owner[k_label] >= 0 and f.owner[k_label] != i:
                    continue
            before = f.local(old) + f.local(k_old)
            f.assign(holder, -1)
            f.assign(i, -1)
            f.assign(holder, k_new)
            f.assign(i, new)
            after = f.local(new) + f.local(k_new)
            # Undo unless strictly better; the pair energy is counted once per side.
            delta = _pair_delta(f, i, holder, old, new, k_old, k_new, before, after)
            if delta < -eps * max(1.0, abs(delta)):
                improved = True
            else:
                f.assign(i, -1)
                f.assign(holder, -1)
                f.assign(i, old)
                f.assign(holder, k_old)
    return tuple(f.y)


def _edge_cost(f: _Field, a: int, b: int) -> float:
    if a < 0 or b < 0:
        return 0.0
    lo, hi = f.indptr[a], f.indptr[a + 1]
    hit = np.flatnonzero(f.nbr[lo:hi] == b)
    return float(f.cost[lo + hit[0]]) if len(hit) else 0.0


def _pair_delta(f: _Field, i, k, old, new, k_old, k_new, before, after) -> float:
    # local() of both endpoints double counts the edge between the two moved
    # assignments; correct for it on both sides of the move.
    return (after - _edge_cost(f, new, k_new)) - (before - _edge_cost(f, old, k_old))


def fm(problem: Problem, params: SolverParams, tracker: Tracker) -> None:
    """Fusion moves: fuse a stream of randomized greedy labelings into the incumbent."""
    rng = np.random.default_rng(params.seed)
    budget = tracker.budget
    incumbent = None
    for _ in range(params.fm_generations):
        y = greedy(problem, rng, params.fm_epsilon, params.fm_k)
        incumbent = y if incumbent is None else fuse(problem, incumbent, y)
        tracker.offer(incumbent)
        if budget.exhausted():
            break
