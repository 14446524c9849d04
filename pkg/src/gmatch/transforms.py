"""Cost transformations and reductions between problem forms.

Each transform returns the new problem and a :class:`TransformReport`
relating objectives: for a labeling ``y`` of the original and its image
``y'``, ``E'(y') = scale * E(y) + shift`` on the feasible set named by the
transform (complete matchings for the bijective-only transforms).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .model import DUMMY, Labeling, Problem


@dataclass(frozen=True)
class TransformReport:
    name: str
    shift: float = 0.0
    scale: float = 1.0
    node_map: tuple[int | None, ...] = ()
    label_map: tuple[int | None, ...] = ()
    num_original_nodes: int = 0
    details: dict = field(default_factory=dict)

    def pullback(self, y: Sequence[int]) -> Labeling:
        """Map a labeling of the transformed problem back to the original."""
        out = [DUMMY] * self.num_original_nodes
        for k, s in enumerate(y):
            i = self.node_map[k]
            if i is None or s == DUMMY:
                continue
            orig = self.label_map[s]
            if orig is not None:
                out[i] = orig
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "transform": self.name,
            "shift": self.shift,
            "scale": self.scale,
            "original_nodes": self.num_original_nodes,
            "node_map": list(self.node_map),
            "label_map": list(self.label_map),
            **self.details,
        }


def _identity_report(problem: Problem, name: str, shift: float = 0.0, scale: float = 1.0,
                     **details) -> TransformReport:
    return TransformReport(
        name, shift, scale,
        tuple(range(problem.num_nodes)), tuple(range(problem.num_labels)),
        problem.num_nodes, details,
    )


def _require_square(problem: Problem, what: str) -> None:
    if not problem.is_square:
        raise PreconditionError(f"{what} requires a bijective problem (|V| = |L|); "
                                "apply gm_to_qap first")


def _edge_dict(problem: Problem) -> dict[tuple[int, int], float]:
    return dict(zip(zip(problem.edge_a.tolist(), problem.edge_b.tolist()), problem.edge_cost.tolist()))


def _rebuild(problem: Problem, unary: np.ndarray, edges: dict[tuple[int, int], float]) -> Problem:
    return Problem(
        problem.num_nodes, problem.num_labels,
        zip(problem.nodes.tolist(), problem.labels.tolist(), np.asarray(unary, float).tolist()),
        [(a, b, c) for (a, b), c in sorted(edges.items())],
        problem.geometry,
    )


# -- reductions ------------------------------------------------------------

def gm_to_qap(problem: Problem) -> tuple[Problem, TransformReport]:
    """Bijective problem over ``M = V + L`` whose complete matchings cover all labelings.

    Node ``|V| + s`` stands for label ``s`` and label ``|L| + i`` is the
    private dummy of node ``i``.  Original assignments keep their ids (so
    edges carry over unchanged); added candidates cost nothing: ``(i, |L|+i)``,
    ``(|V|+s, s)`` and the transposed ``(|V|+s, |L|+i)`` of every original
    ``(i, s)``.
    """
    nv, nl = problem.num_nodes, problem.num_labels
    size = nv + nl
    assignments = list(zip(problem.nodes.tolist(), problem.labels.tolist(), problem.unary.tolist()))
    assignments += [(i, nl + i, 0.0) for i in range(nv)]
    assignments += [(nv + s, s, 0.0) for s in range(nl)]
    assignments += [(nv + s, nl + i, 0.0) for i, s in zip(problem.nodes.tolist(), problem.labels.tolist())]
    edges = zip(problem.edge_a.tolist(), problem.edge_b.tolist(), problem.edge_cost.tolist())
    out = Problem(size, size, assignments, edges)
    report = TransformReport(
        "gm_to_qap", 0.0, 1.0,
        tuple(range(nv)) + (None,) * nl,
        tuple(range(nl)) + (None,) * nv,
        nv,
    )
    return out, report


def qap_to_gm(problem: Problem, mode: str = "unary", k: float | None = None) -> tuple[Problem, TransformReport]:
    """Shift a bijective problem so that optimal incomplete matchings are complete.

    ``mode="full"`` subtracts ``max(w) + 1`` from every entry of the cost
    matrix (densifying the pairwise part); the shift per complete matching is
    ``-|M|^2 (max(w) + 1)``.  ``mode="unary"`` only lowers the unaries by
    ``k``, which by default exceeds the total absolute cost so that adding an
    assignment always pays; the shift is ``-|M| k``.
    """
    _require_square(problem, "qap_to_gm")
    m = problem.num_nodes
    if mode == "unary":
        if k is None:
            k = 1.0 + float(np.abs(problem.unary).sum() + np.abs(problem.edge_cost).sum())
        out = problem.with_costs(unary=problem.unary - k)
        return out, _identity_report(problem, "qap_to_gm", -m * k, mode="unary", k=k)
    if mode != "full":
        raise ValueError(f"unknown qap_to_gm mode {mode!r}")

    entries = [problem.unary, problem.edge_cost / 2.0]
    if m >= 2:
        entries.append(np.zeros(1))
    w_max = float(max((e.max() for e in entries if e.size), default=0.0))
    delta = w_max + 1.0
    edges = _edge_dict(problem)
    new_edges: dict[tuple[int, int], float] = {}
    ids = np.arange(problem.num_assignments)
    for a in range(problem.num_assignments):
        partners = ids[(ids > a) & (problem.nodes != problem.nodes[a]) & (problem.labels != problem.labels[a])]
        for b in partners.tolist():
            new_edges[(a, b)] = edges.get((a, b), 0.0) - 2.0 * delta
    out = _rebuild(problem, problem.unary - delta, new_edges)
    return out, _identity_report(problem, "qap_to_gm", -m * m * delta, mode="full", max_w=w_max)


# -- cost normalizations ---------------------------------------------------------

def make_non_positive(problem: Problem) -> tuple[Problem, TransformReport]:
    """Shift unary rows and pairwise node blocks so every finite cost is <= 0.

    Each node's unaries drop by the positive part of their maximum, and each
    node-pair block by the positive part of its maximum over label pairs that
    can co-occur (absent pairs count as 0, so a shifted block becomes dense).
    Objectives of complete matchings all move by the same constant.
    """
    _require_square(problem, "make_non_positive")
    unary = problem.unary.copy()
    shift = 0.0
    for i, ids in enumerate(problem.node_assignments):
        if len(ids) == 0:
            continue
        alpha = max(0.0, float(problem.unary[ids].max()))
        unary[ids] -= alpha
        shift -= alpha

    edges = _edge_dict(problem)
    positive_blocks = set()
    for (a, b), c in edges.items():
        if c > 0:
            i, j = int(problem.nodes[a]), int(problem.nodes[b])
            positive_blocks.add((min(i, j), max(i, j)))
    for i, j in sorted(positive_blocks):
        cells = []
        for a in problem.node_assignments[i].tolist():
            for b in problem.node_assignments[j].tolist():
                if problem.labels[a] != problem.labels[b]:
                    cells.append((min(a, b), max(a, b)))
        alpha = max(edges.get(key, 0.0) for key in cells)
        for key in cells:
            edges[key] = edges.get(key, 0.0) - alpha
        shift -= alpha
    return _rebuild(problem, unary, edges), _identity_report(problem, "make_non_positive", shift)


def _zero_count(problem: Problem, edges: dict[tuple[int, int], float], a: int, j: int) -> int:
    s = problem.labels[a]
    count = 0
    for b in problem.node_assignments[j].tolist():
        if problem.labels[b] != s and edges.get((min(a, b), max(a, b)), 0.0) == 0.0:
            count += 1
    return count


def unary_hosts(problem: Problem) -> dict[int, int]:
    """Node chosen to absorb each non-zero unary: fewest new non-zeros, smallest index on ties."""
    edges = _edge_dict(problem)
    hosts = {}
    for a in np.flatnonzero(problem.unary != 0).tolist():
        i = int(problem.nodes[a])
        counts = [(_zero_count(problem, edges, a, j), j) for j in range(problem.num_nodes) if j != i]
        hosts[a] = min(counts)[1]
    return hosts


def remove_unary(problem: Problem) -> tuple[Problem, TransformReport]:
    """Fold every unary into the pairwise costs towards one host node.

    For ``(i, s)`` the host node ``j`` minimizes the number of zero entries
    ``c[is, jl]`` with ``l != s``; the unary is added to every such entry.
    In a complete matching node ``j`` takes exactly one of those labels, so
    objectives of complete matchings are unchanged.
    """
    _require_square(problem, "remove_unary")
    if problem.num_nodes < 2:
        raise PreconditionError("remove_unary needs at least two nodes to host unary costs")
    edges = _edge_dict(problem)
    for a, j in unary_hosts(problem).items():
        u = float(problem.unary[a])
        s = problem.labels[a]
        for b in problem.node_assignments[j].tolist():
            if problem.labels[b] != s:
                key = (min(a, b), max(a, b))
                edges[key] = edges.get(key, 0.0) + u
    out = _rebuild(problem, np.zeros(problem.num_assignments), edges)
    return out, _identity_report(problem, "remove_unary", 0.0)


def negate_for_max(problem: Problem) -> Problem:
    """Flip the sign of every cost, for solvers written as maximizers."""
    return problem.with_costs(unary=-problem.unary, edge_cost=-problem.edge_cost)


# -- linear assignment ----------------------------------------------------

@dataclass(frozen=True)
class LapReduction:
    """Square LAP equivalent to an incomplete linear assignment problem.

    Rows are nodes followed by one dummy row per label; columns are labels
    followed by one dummy column per node.  Every dummy entry costs zero.
    """

    matrix: np.ndarray
    num_nodes: int
    num_labels: int

    def pullback(self, perm: Sequence[int]) -> Labeling:
        return tuple(int(c) if c < self.num_labels else DUMMY for c in perm[:self.num_nodes])


def ilap_to_lap(problem: Problem) -> LapReduction:
    if not problem.is_edge_free:
        raise PreconditionError("ilap_to_lap requires a problem without edges")
    nv, nl = problem.num_nodes, problem.num_labels
    m = np.zeros((nv + nl, nl + nv))
    m[:nv, :nl] = np.inf
    m[problem.nodes, problem.labels] = problem.unary
    return LapReduction(m, nv, nl)


# -- solver preparation ------------------------------------------------------------

@dataclass(frozen=True)
class Requirements:
    bijective: bool = False
    non_positive: bool = False
    zero_unary: bool = False
    maximize: bool = False


def compose_pullback(reports: Sequence[TransformReport], y: Sequence[int]) -> Labeling:
    for report in reversed(reports):
        y = report.pullback(y)
    return tuple(y)


def prepare(problem: Problem, req: Requirements, assume_bijective: bool = False
            ) -> tuple[Problem, list[TransformReport]]:
    """Apply transforms in fixed order: bijective, non-positive, zero-unary, negation.

    ``assume_bijective`` declares that only complete matchings matter, so a
    square problem is used as is instead of being embedded by gm_to_qap.
    """
    reports: list[TransformReport] = []
    p = problem
    if req.bijective or req.non_positive or req.zero_unary:
        if not (assume_bijective and p.is_square):
            p, r = gm_to_qap(p)
            reports.append(r)
    if req.non_positive and (np.any(p.unary > 0) or np.any(p.edge_cost > 0)):
        p, r = make_non_positive(p)
        reports.append(r)
    if req.zero_unary and np.any(p.unary != 0):
        p, r = remove_unary(p)
        reports.append(r)
    if req.maximize:
        p = negate_for_max(p)
        reports.append(_identity_report(p, "negate_for_max", 0.0, -1.0))
    return p, reports
