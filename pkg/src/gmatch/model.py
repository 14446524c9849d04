"""Sparse graph matching problems, labelings and the exhaustive oracle.

A :class:`Problem` lists candidate assignments ``(i, s)`` of a node ``i`` to a
label ``s`` together with their unary costs, and edges between pairs of
assignments carrying the symmetrized pairwise cost ``c[is,jl] + c[jl,is]``.
Absent pairs are forbidden assignments.  A labeling is a tuple with one entry
per node holding either a label or :data:`DUMMY` (node left unassigned).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    InfeasibleError,
    InvalidLabelingError,
    InvalidProblemError,
    SizeError,
)

DUMMY = -1

Labeling = tuple[int, ...]


@dataclass(frozen=True)
class Geometry:
    """Optional point coordinates and neighborhoods (dd ``i0/i1/n0/n1`` lines).

    Never used when computing costs.
    """

    left: tuple[tuple[int, float, float], ...] = ()
    right: tuple[tuple[int, float, float], ...] = ()
    left_neighbors: tuple[tuple[int, int], ...] = ()
    right_neighbors: tuple[tuple[int, int], ...] = ()

    def __bool__(self) -> bool:
        return bool(self.left or self.right or self.left_neighbors or self.right_neighbors)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Problem:
    """Immutable sparse graph matching instance.

    Args:
        num_nodes: size of the node set V.
        num_labels: size of the label set L.
        assignments: ``(i, s, unary_cost)`` triples; the position in the
            sequence is the assignment id.
        edges: ``(id1, id2, cost)`` triples; ``cost`` is the symmetrized
            pairwise term of the two assignments.
        geometry: optional coordinates, carried through I/O only.

    Raises:
        InvalidProblemError: on out-of-range indices, duplicate ``(i, s)``
            pairs, duplicate edges, non-finite costs, or an edge joining two
            assignments that share a node or a label.
    """

    def __init__(
        self,
        num_nodes: int,
        num_labels: int,
        assignments: Iterable[tuple[int, int, float]] = (),
        edges: Iterable[tuple[int, int, float]] = (),
        geometry: Geometry | None = None,
    ):
        if num_nodes < 0 or num_labels < 0:
            raise InvalidProblemError("node and label counts must be non-negative")
        self.num_nodes = int(num_nodes)
        self.num_labels = int(num_labels)
        self.geometry = geometry if geometry is not None else Geometry()

        assignments = list(assignments)
        nodes = np.fromiter((a[0] for a in assignments), dtype=np.int64, count=len(assignments))
        labels = np.fromiter((a[1] for a in assignments), dtype=np.int64, count=len(assignments))
        unary = np.fromiter((a[2] for a in assignments), dtype=np.float64, count=len(assignments))
        if len(assignments):
            if nodes.min() < 0 or nodes.max() >= num_nodes:
                raise InvalidProblemError("assignment node out of range")
            if labels.min() < 0 or labels.max() >= num_labels:
                raise InvalidProblemError("assignment label out of range")
            if not np.all(np.isfinite(unary)):
                raise InvalidProblemError("unary costs must be finite")
            keys = nodes * max(num_labels, 1) + labels
            if len(np.unique(keys)) != len(keys):
                raise InvalidProblemError("duplicate (node, label) assignment")

        edges = list(edges)
        ea = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
        eb = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
        ec = np.fromiter((e[2] for e in edges), dtype=np.float64, count=len(edges))
        if len(edges):
            n_a = len(assignments)
            if min(ea.min(), eb.min()) < 0 or max(ea.max(), eb.max()) >= n_a:
                raise InvalidProblemError("edge references unknown assignment id")
            if not np.all(np.isfinite(ec)):
                raise InvalidProblemError("pairwise costs must be finite")
            if np.any(nodes[ea] == nodes[eb]):
                raise InvalidProblemError("edge joins two assignments of the same node")
            if np.any(labels[ea] == labels[eb]):
                raise InvalidProblemError("edge joins two assignments of the same label")
            lo, hi = np.minimum(ea, eb), np.maximum(ea, eb)
            order = np.lexsort((hi, lo))
            lo, hi, ec = lo[order], hi[order], ec[order]
            if np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
                raise InvalidProblemError("duplicate edge between the same assignment pair")
            ea, eb = lo, hi

        self.nodes = _readonly(nodes)
        self.labels = _readonly(labels)
        self.unary = _readonly(unary)
        self.edge_a = _readonly(ea)
        self.edge_b = _readonly(eb)
        self.edge_cost = _readonly(ec)

    # -- structure -----------------------------------------------------

    @property
    def num_assignments(self) -> int:
        return len(self.unary)

    @property
    def num_edges(self) -> int:
        return len(self.edge_cost)

    @property
    def is_edge_free(self) -> bool:
        return self.num_edges == 0

    @property
    def is_square(self) -> bool:
        return self.num_nodes == self.num_labels

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        """Map ``(node, label)`` to assignment id."""
        return {(int(i), int(s)): a for a, (i, s) in enumerate(zip(self.nodes, self.labels))}

    def assignment_id(self, node: int, label: int) -> int | None:
        return self.index.get((node, label))

    @cached_property
    def node_assignments(self) -> list[np.ndarray]:
        """Assignment ids of every node, sorted by label."""
        order = np.lexsort((self.labels, self.nodes))
        bounds = np.searchsorted(self.nodes[order], np.arange(self.num_nodes + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.num_nodes)]

    @cached_property
    def label_assignments(self) -> list[np.ndarray]:
        order = np.lexsort((self.nodes, self.labels))
        bounds = np.searchsorted(self.labels[order], np.arange(self.num_labels + 1))
        return [order[bounds[s]:bounds[s + 1]] for s in range(self.num_labels)]

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR arrays ``(indptr, neighbor, cost)`` over assignments, both directions."""
        src = np.concatenate([self.edge_a, self.edge_b])
        dst = np.concatenate([self.edge_b, self.edge_a])
        cost = np.concatenate([self.edge_cost, self.edge_cost])
        order = np.argsort(src, kind="stable")
        indptr = np.searchsorted(src[order], np.arange(self.num_assignments + 1))
        return indptr, dst[order], cost[order]

    @cached_property
    def adjacency_lists(self) -> list[list[tuple[int, float]]]:
        indptr, nbr, cost = self.adjacency
        return [
            list(zip(nbr[indptr[a]:indptr[a + 1]].tolist(), cost[indptr[a]:indptr[a + 1]].tolist()))
            for a in range(self.num_assignments)
        ]

    @cached_property
    def pairwise_matrix(self) -> sp.csr_matrix:
        """Symmetric sparse matrix holding half of every edge cost at (a, b) and (b, a)."""
        n = self.num_assignments
        half = self.edge_cost / 2.0
        m = sp.coo_matrix(
            (np.concatenate([half, half]), (np.concatenate([self.edge_a, self.edge_b]),
                                            np.concatenate([self.edge_b, self.edge_a]))),
            shape=(n, n),
        )
        return m.tocsr()

    @cached_property
    def cost_matrix(self) -> sp.csr_matrix:
        """Sparse Lawler matrix over candidates: unaries on the diagonal, split edges off it."""
        return (self.pairwise_matrix + sp.diags(self.unary)).tocsr()

    def with_costs(self, unary: np.ndarray | None = None, edge_cost: np.ndarray | None = None) -> Problem:
        """Same structure, new cost arrays (edge order as in ``edge_a/edge_b``)."""
        unary = self.unary if unary is None else np.asarray(unary, dtype=float)
        edge_cost = self.edge_cost if edge_cost is None else np.asarray(edge_cost, dtype=float)
        return Problem(
            self.num_nodes,
            self.num_labels,
            zip(self.nodes.tolist(), self.labels.tolist(), unary.tolist()),
            zip(self.edge_a.tolist(), self.edge_b.tolist(), edge_cost.tolist()),
            self.geometry,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Problem):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.num_labels == other.num_labels
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.unary, other.unary)
            and np.array_equal(self.edge_a, other.edge_a)
            and np.array_equal(self.edge_b, other.edge_b)
            and np.array_equal(self.edge_cost, other.edge_cost)
            and self.geometry == other.geometry
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (f"Problem(|V|={self.num_nodes}, |L|={self.num_labels}, "
                f"#A={self.num_assignments}, #E={self.num_edges})")


# -- labelings ---------------------------------------------------------

def dummy_labeling(problem: Problem) -> Labeling:
    return (DUMMY,) * problem.num_nodes


def active_ids(problem: Problem, y: Sequence[int]) -> np.ndarray:
    """Assignment ids selected by ``y``.

    Raises:
        InvalidLabelingError: wrong length or a non-candidate pair.
    """
    if len(y) != problem.num_nodes:
        raise InvalidLabelingError(f"labeling has {len(y)} entries, expected {problem.num_nodes}")
    ids = []
    index = problem.index
    for i, s in enumerate(y):
        if s == DUMMY:
            continue
        a = index.get((i, int(s)))
        if a is None:
            raise InvalidLabelingError(f"({i}, {s}) is not a candidate assignment")
        ids.append(a)
    return np.asarray(ids, dtype=np.int64)


def labeling_from_ids(problem: Problem, ids: Iterable[int]) -> Labeling:
    y = [DUMMY] * problem.num_nodes
    for a in ids:
        y[int(problem.nodes[a])] = int(problem.labels[a])
    return tuple(y)


def indicator(problem: Problem, y: Sequence[int]) -> np.ndarray:
    x = np.zeros(problem.num_assignments)
    x[active_ids(problem, y)] = 1.0
    return x


def is_feasible(problem: Problem, y: Sequence[int]) -> bool:
    """True iff every entry is a candidate (or dummy) and labels are unique."""
    try:
        ids = active_ids(problem, y)
    except InvalidLabelingError:
        return False
    labels = problem.labels[ids]
    return len(np.unique(labels)) == len(labels)


def evaluate(problem: Problem, y: Sequence[int]) -> float:
    """Objective of a feasible labeling: active unaries plus edges with both ends active.

    Raises:
        InvalidLabelingError: ``y`` uses a non-candidate pair.
        InfeasibleError: two nodes share a label.
    """
    ids = active_ids(problem, y)
    labels = problem.labels[ids]
    if len(np.unique(labels)) != len(labels):
        raise InfeasibleError("label assigned to more than one node")
    return _energy_of_ids(problem, ids)


def _energy_of_ids(problem: Problem, ids: np.ndarray) -> float:
    active = np.zeros(problem.num_assignments, dtype=bool)
    active[ids] = True
    pair = active[problem.edge_a] & active[problem.edge_b]
    return float(problem.unary[ids].sum() + problem.edge_cost[pair].sum())


def as_fractional(problem: Problem, x: Sequence[float]) -> np.ndarray:
    """Validate a fractional solution: one finite non-negative weight per assignment."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.num_assignments,):
        raise InvalidLabelingError(f"fractional solution must have shape ({problem.num_assignments},)")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise InvalidLabelingError("fractional weights must be finite and non-negative")
    return x


# -- dense view ----------------------------------------------------------

DENSE_BUDGET = 2048


def to_dense(problem: Problem, max_side: int = DENSE_BUDGET) -> np.ndarray:
    """Square cost matrix over V x L, row/column index ``i * |L| + s``.

    Non-candidate diagonal entries are ``+inf``; each edge cost is split
    evenly between its two symmetric positions, so ``x @ C @ x`` over the
    active support reproduces :func:`evaluate`.
    """
    side = problem.num_nodes * problem.num_labels
    if side > max_side:
        raise SizeError(f"dense matrix side {side} exceeds budget {max_side}")
    c = np.zeros((side, side))
    flat = problem.nodes * problem.num_labels + problem.labels
    diag = np.full(side, np.inf)
    diag[flat] = problem.unary
    c[np.arange(side), np.arange(side)] = diag
    fa, fb = flat[problem.edge_a], flat[problem.edge_b]
    c[fa, fb] = problem.edge_cost / 2.0
    c[fb, fa] = problem.edge_cost / 2.0
    return c


# -- exhaustive oracle ---------------------------------------------------

def _tie_eps(best: float) -> float:
    return 1e-12 * max(1.0, abs(best))


def _can_match(nodes: list[int], options: list[list[tuple[int, int]]], used: set[int]) -> bool:
    """Kuhn's augmenting paths: can every node in ``nodes`` take a distinct unused label?"""
    owner: dict[int, int] = {}

    def augment(k: int, seen: set[int]) -> bool:
        for s, _a in options[nodes[k]]:
            if s in used or s in seen:
                continue
            seen.add(s)
            if s not in owner or augment(owner[s], seen):
                owner[s] = k
                return True
        return False

    return all(augment(k, set()) for k in range(len(nodes)))


def brute_force_solve(
    problem: Problem,
    complete: bool = False,
    max_assignments: int = 25,
    max_nodes: int = 8,
) -> tuple[Labeling, float]:
    """Globally optimal labeling by exhaustive enumeration with uniqueness pruning.

    Ties go to the lexicographically smallest labeling (dummy sorts first).
    With ``complete=True`` only labelings assigning every node are considered.

    Raises:
        SizeError: more than ``max_assignments`` candidates and more than
            ``max_nodes`` nodes.
        InfeasibleError: ``complete=True`` and no complete matching exists.
    """
    n = problem.num_nodes
    if problem.num_assignments > max_assignments and n > max_nodes:
        raise SizeError(
            f"enumeration budget exceeded: {problem.num_assignments} candidates, {n} nodes")

    options = [[(int(problem.labels[a]), int(a)) for a in problem.node_assignments[i]]
               for i in range(n)]
    adj = problem.adjacency_lists
    unary = problem.unary.tolist()

    # Edges between two undecided nodes: each node pair adds at most its
    # cheapest edge.  pair_lb[k] sums these over pairs of nodes >= k.
    block_min: dict[tuple[int, int], float] = {}
    for a, b, c in zip(problem.edge_a.tolist(), problem.edge_b.tolist(), problem.edge_cost.tolist()):
        key = (int(problem.nodes[a]), int(problem.nodes[b]))
        key = (min(key), max(key))
        block_min[key] = min(block_min.get(key, 0.0), c)
    first = [0.0] * (n + 1)
    for (i, _j), c in block_min.items():
        first[i] += c
    pair_lb = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        pair_lb[k] = pair_lb[k + 1] + first[k]

    # From depth k on nothing can change the objective.
    silent = [True] * (n + 1)
    for k in range(n - 1, -1, -1):
        quiet = all(unary[a] == 0.0 and not adj[a] for _, a in options[k])
        silent[k] = silent[k + 1] and quiet

    y = [DUMMY] * n
    # h[a]: summed cost of edges between a and the active assignments.
    h = [0.0] * problem.num_assignments
    used: set[int] = set()
    best_val = math.inf
    best_y: list[int] | None = None

    def lexmin_completion(k: int) -> list[int] | None:
        if not complete:
            return [DUMMY] * (n - k)
        tail: list[int] = []
        taken = set(used)
        for node in range(k, n):
            for s, _a in options[node]:
                if s in taken:
                    continue
                taken.add(s)
                if _can_match(list(range(node + 1, n)), options, taken):
                    tail.append(s)
                    break
                taken.discard(s)
            else:
                return None
        return tail

    def rest_bound(k: int) -> float:
        """Each undecided node alone at its best free label, plus pair_lb."""
        total = pair_lb[k]
        for node in range(k, n):
            m = math.inf if complete else 0.0
            for s, a in options[node]:
                if s not in used and unary[a] + h[a] < m:
                    m = unary[a] + h[a]
            total += m
        return total

    def visit(k: int, value: float) -> None:
        nonlocal best_val, best_y
        if value + rest_bound(k) >= best_val - _tie_eps(best_val):
            return
        if silent[k]:
            tail = lexmin_completion(k)
            if tail is not None:
                best_val, best_y = value, y[:k] + tail
            return
        if not complete:
            y[k] = DUMMY
            visit(k + 1, value)
        for s, a in options[k]:
            if s in used:
                continue
            inc = unary[a] + h[a]
            y[k] = s
            used.add(s)
            for b, c in adj[a]:
                h[b] += c
            visit(k + 1, value + inc)
            for b, c in adj[a]:
                h[b] -= c
            used.discard(s)
        y[k] = DUMMY

    visit(0, 0.0)
    if best_y is None:
        raise InfeasibleError("no complete matching exists")
    # Recomputed so that incremental rounding in h never leaks into the result.
    return tuple(best_y), evaluate(problem, best_y)


# -- run records -----------------------------------------------------------

@dataclass
class TracePoint:
    elapsed: float
    energy: float
    bound: float | None
    labeling: Labeling


@dataclass
class RunRecord:
    """Outcome of one solver run.

    ``trace`` holds best-so-far values: elapsed strictly increasing, energy
    non-increasing, bound non-decreasing.  ``energy`` is always reported in
    the original minimization sign.  A crashed run has an empty labeling and
    trace, infinite energy and an ``error`` message.
    """

    solver: str
    instance: str
    labeling: Labeling
    energy: float
    bound: float | None = None
    trace: list[TracePoint] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    total_time: float = 0.0
    error: str | None = None  # set when the solver crashed; no solution then

    def to_dict(self) -> dict:
        """JSON-ready dict; a trace point omits its labeling when unchanged from the previous one."""
        trace, prev = [], None
        for p in self.trace:
            point = {"elapsed": p.elapsed, "energy": p.energy, "bound": p.bound}
            if p.labeling != prev:
                point["labeling"] = [None if s == DUMMY else s for s in p.labeling]
            prev = p.labeling
            trace.append(point)
        return {
            "solver": self.solver,
            "instance": self.instance,
            "params": self.params,
            "labeling": [None if s == DUMMY else s for s in self.labeling],
            "energy": self.energy if np.isfinite(self.energy) else None,
            "bound": self.bound,
            "error": self.error,
            "timing": {
                "total": self.total_time,
                "trace": trace,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        def lab(v):
            return tuple(DUMMY if s is None else int(s) for s in v)

        timing = d.get("timing", {})
        trace, prev = [], None
        for p in timing.get("trace", []):
            prev = lab(p["labeling"]) if "labeling" in p else prev
            if prev is None:
                raise ValueError("first trace point needs a labeling")
            trace.append(TracePoint(float(p["elapsed"]), float(p["energy"]),
                                    None if p.get("bound") is None else float(p["bound"]), prev))
        return cls(
            solver=d["solver"],
            instance=d["instance"],
            labeling=lab(d["labeling"]),
            energy=float("inf") if d["energy"] is None else float(d["energy"]),
            bound=None if d.get("bound") is None else float(d["bound"]),
            trace=trace,
            params=d.get("params", {}),
            total_time=float(timing.get("total", 0.0)),
            error=d.get("error"),
        )
