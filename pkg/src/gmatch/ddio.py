"""Reader and writer for the line-oriented dd graph matching format.

Line types::

    c <comment>
    p <#V> <#L> <#A> <#E>
    a <id> <i> <s> <cost>
    e <id1> <id2> <cost>
    i0 <i> <x> <y>
    i1 <s> <x> <y>
    n0 <i> <j>
    n1 <s> <l>

Ids are 0-based. Edge costs are the symmetrized pairwise term. Coordinate
and neighbor lines are kept as geometry but never enter the costs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import IO

from .errors import InvalidProblemError, ParseError
from .model import Geometry, Problem

_INT = re.compile(r"[+-]?[0-9]+\Z")
_REAL = re.compile(r"[+-]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?\Z")

_MAX_COUNT = 2**31 - 1

_ARITY = {"p": 4, "a": 4, "e": 3, "i0": 3, "i1": 3, "n0": 2, "n1": 2}


@dataclass
class DdDocument:
    """Parsed dd file before cost-structure validation."""

    num_nodes: int = 0
    num_labels: int = 0
    num_assignments: int = 0
    num_edges: int = 0
    assignments: dict[int, tuple[int, int, float]] = field(default_factory=dict)
    edges: list[tuple[int, int, float]] = field(default_factory=list)
    left: list[tuple[int, float, float]] = field(default_factory=list)
    right: list[tuple[int, float, float]] = field(default_factory=list)
    left_neighbors: list[tuple[int, int]] = field(default_factory=list)
    right_neighbors: list[tuple[int, int]] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)


def _int(tok: str, lineno: int) -> int:
    if not _INT.match(tok):
        raise ParseError(f"expected an integer, got {tok!r}", lineno)
    return int(tok)


def _real(tok: str, lineno: int) -> float:
    if not _REAL.match(tok):
        raise ParseError(f"expected a finite decimal number, got {tok!r}", lineno)
    value = float(tok)
    if not math.isfinite(value):
        raise ParseError(f"number out of range: {tok!r}", lineno)
    return value


def _check_range(value: int, bound: int, what: str, lineno: int) -> int:
    if not 0 <= value < bound:
        raise ParseError(f"{what} {value} out of range [0, {bound})", lineno)
    return value


def read_document(text: str | bytes) -> DdDocument:
    """Tokenize and validate dd text against its prologue.

    Raises:
        ParseError: with the offending 1-based line number where applicable.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc.reason}") from None

    doc = DdDocument()
    seen_prologue = False
    edge_lines: list[int] = []
    assignment_lines: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        tag = tokens[0]
        if tag == "c":
            doc.comments.append(stripped[1:].strip())
            continue
        if tag not in _ARITY:
            raise ParseError(f"unknown line tag {tag!r}", lineno)
        args = tokens[1:]
        if len(args) != _ARITY[tag]:
            raise ParseError(f"'{tag}' line expects {_ARITY[tag]} fields, got {len(args)}", lineno)

        if tag == "p":
            if seen_prologue:
                raise ParseError("duplicate 'p' line", lineno)
            counts = [_int(t, lineno) for t in args]
            if min(counts) < 0 or max(counts) > _MAX_COUNT:
                raise ParseError(f"prologue counts must lie in [0, {_MAX_COUNT}]", lineno)
            doc.num_nodes, doc.num_labels, doc.num_assignments, doc.num_edges = counts
            seen_prologue = True
            continue
        if not seen_prologue:
            raise ParseError(f"'{tag}' line before 'p' prologue", lineno)

        if tag == "a":
            aid = _check_range(_int(args[0], lineno), doc.num_assignments, "assignment id", lineno)
            i = _check_range(_int(args[1], lineno), doc.num_nodes, "node", lineno)
            s = _check_range(_int(args[2], lineno), doc.num_labels, "label", lineno)
            cost = _real(args[3], lineno)
            if aid in doc.assignments:
                raise ParseError(f"duplicate assignment id {aid}", lineno)
            doc.assignments[aid] = (i, s, cost)
            assignment_lines[aid] = lineno
        elif tag == "e":
            a = _check_range(_int(args[0], lineno), doc.num_assignments, "assignment id", lineno)
            b = _check_range(_int(args[1], lineno), doc.num_assignments, "assignment id", lineno)
            doc.edges.append((a, b, _real(args[2], lineno)))
            edge_lines.append(lineno)
        elif tag in ("i0", "i1"):
            bound = doc.num_nodes if tag == "i0" else doc.num_labels
            k = _check_range(_int(args[0], lineno), bound, "point", lineno)
            point = (k, _real(args[1], lineno), _real(args[2], lineno))
            (doc.left if tag == "i0" else doc.right).append(point)
        else:
            bound = doc.num_nodes if tag == "n0" else doc.num_labels
            u = _check_range(_int(args[0], lineno), bound, "point", lineno)
            v = _check_range(_int(args[1], lineno), bound, "point", lineno)
            (doc.left_neighbors if tag == "n0" else doc.right_neighbors).append((u, v))

    if not seen_prologue:
        raise ParseError("missing 'p' prologue")
    if len(doc.assignments) != doc.num_assignments:
        raise ParseError(
            f"prologue declares {doc.num_assignments} assignments, found {len(doc.assignments)}")
    if len(doc.edges) != doc.num_edges:
        raise ParseError(f"prologue declares {doc.num_edges} edges, found {len(doc.edges)}")

    pairs: dict[tuple[int, int], int] = {}
    for aid, (i, s, _c) in sorted(doc.assignments.items()):
        if (i, s) in pairs:
            raise ParseError(f"duplicate assignment ({i}, {s}) in ids {pairs[(i, s)]} and {aid}",
                             max(assignment_lines[aid], assignment_lines[pairs[(i, s)]]))
        pairs[(i, s)] = aid
    seen_edges: set[tuple[int, int]] = set()
    for (a, b, _c), lineno in zip(doc.edges, edge_lines):
        ia, sa, _ = doc.assignments[a]
        ib, sb, _ = doc.assignments[b]
        if a == b or ia == ib:
            raise ParseError(f"edge {a}-{b} joins assignments of the same node", lineno)
        if sa == sb:
            raise ParseError(f"edge {a}-{b} joins assignments of the same label", lineno)
        key = (min(a, b), max(a, b))
        if key in seen_edges:
            raise ParseError(f"duplicate edge {key[0]}-{key[1]}", lineno)
        seen_edges.add(key)
    return doc


def to_problem(doc: DdDocument) -> Problem:
    geometry = Geometry(
        tuple(sorted(doc.left)), tuple(sorted(doc.right)),
        tuple(sorted(doc.left_neighbors)), tuple(sorted(doc.right_neighbors)),
    )
    try:
        return Problem(
            doc.num_nodes,
            doc.num_labels,
            [doc.assignments[k] for k in range(doc.num_assignments)],
            doc.edges,
            geometry,
        )
    except InvalidProblemError as exc:
        raise ParseError(str(exc)) from None


def parse(source: str | bytes | IO) -> Problem:
    """Parse dd text (string, bytes or readable stream) into a :class:`Problem`."""
    if hasattr(source, "read"):
        source = source.read()
    return to_problem(read_document(source))


def load(path) -> Problem:
    with open(path, "rb") as fh:
        return parse(fh.read())


def format_cost(value: float) -> str:
    """Shortest decimal text that round-trips to the same float."""
    value = float(value)
    if value == 0.0:
        return "0"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def write(problem: Problem) -> str:
    """Canonical dd text; ``parse(write(p)) == p``."""
    out = [f"p {problem.num_nodes} {problem.num_labels} "
           f"{problem.num_assignments} {problem.num_edges}"]
    for aid, (i, s, c) in enumerate(zip(problem.nodes.tolist(), problem.labels.tolist(),
                                         problem.unary.tolist())):
        out.append(f"a {aid} {i} {s} {format_cost(c)}")
    for a, b, c in zip(problem.edge_a.tolist(), problem.edge_b.tolist(), problem.edge_cost.tolist()):
        out.append(f"e {a} {b} {format_cost(c)}")
    g = problem.geometry
    out += [f"i0 {k} {format_cost(x)} {format_cost(y)}" for k, x, y in g.left]
    out += [f"i1 {k} {format_cost(x)} {format_cost(y)}" for k, x, y in g.right]
    out += [f"n0 {u} {v}" for u, v in g.left_neighbors]
    out += [f"n1 {u} {v}" for u, v in g.right_neighbors]
    return "\n".join(out) + "\n"


def save(problem: Problem, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(write(problem))
