import numpy as np
import pytest

from gmatch import InvalidProblemError, ParseError, Problem
from gmatch.ddio import format_cost, load, parse, read_document, write

from conftest import make_t1

CANONICAL = ["t1.dd", "house5.dd", "caltech5x7.dd", "random7.dd", "empty.dd"]


def test_parse_format_example():
    p = parse("p 2 2 2 1\na 0 0 0 -1\na 1 1 1 -1\ne 0 1 -5")
    assert (p.num_nodes, p.num_assignments, p.num_edges) == (2, 2, 1)
    assert p.edge_cost.tolist() == [-5.0]


def test_comment_ignored():
    p = parse("c hello\np 1 1 1 0\na 0 0 0 0.5")
    assert p.num_assignments == 1 and p.unary.tolist() == [0.5]


@pytest.mark.parametrize("text", [
    "p 1 1 2 0\na 0 0 0 1\na 1 0 0 2",
])
def test_duplicate_pair_rejected(text):
    with pytest.raises((ParseError, InvalidProblemError)):
        parse(text)


@pytest.mark.parametrize("text, line", [
    ("p 2 2 1 0\na 0 0 0 -1\na 0 0 1 x\n", 3),
    ("a 0 0 0 1\n", 1),
    ("p 1 1 1 0\na 0 0 0 1 7\n", 2),
    ("p 1 1 1 0\na 0 0 0 nan\n", 2),
    ("p 1 1 1 0\nz 1\n", 2),
    ("p 1 1 1 0\np 1 1 1 0\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_counts_must_match():
    with pytest.raises(ParseError):
        parse("p 1 1 2 0\na 0 0 0 1\n")


def test_write_t1():
    text = write(make_t1())
    lines = text.splitlines()
    assert lines[0] == "p 2 2 4 2"
    assert sum(ln.startswith("a ") for ln in lines) == 4
    assert sum(ln.startswith("e ") for ln in lines) == 2


def test_write_empty():
    assert write(Problem(0, 0)) == "p 0 0 0 0\n"


@pytest.mark.parametrize("name", CANONICAL)
def test_golden_round_trip(data_dir, name):
    text = (data_dir / name).read_text()
    p = load(data_dir / name)
    assert write(p) == text
    assert parse(write(p)) == p


def test_non_canonical_golden(data_dir):
    p = load(data_dir / "t1_commented.dd")
    assert p == make_t1()
    assert parse(write(p)) == p


def test_geometry_survives(data_dir):
    doc = read_document((data_dir / "house5.dd").read_text())
    assert len(doc.left) == 5 and len(doc.left_neighbors) > 0
    assert load(data_dir / "house5.dd").geometry.left[0][0] == 0


@pytest.mark.parametrize("value", [0.0, -1.0, 0.1, -3.25e-12, 1e300, 2.0**60, -0.0])
def test_format_cost_round_trips(value):
    assert float(format_cost(value)) == value


def test_random_costs_round_trip():
    rng = np.random.default_rng(0)
    costs = rng.normal(size=50) * 10.0 ** rng.integers(-8, 8, size=50)
    p = Problem(50, 1, [(i, 0, float(c)) for i, c in enumerate(costs)])
    assert parse(write(p)) == p
