from pathlib import Path

import numpy as np
import pytest

from gmatch import Problem

DATA = Path(__file__).parent / "data"


def make_t1() -> Problem:
    # V = {0, 1}, L = {0, 1}; ids 0..3 are (0,0), (0,1), (1,0), (1,1).
    return Problem(2, 2, [(0, 0, -1), (0, 1, -2), (1, 0, -3), (1, 1, -1)],
                   [(0, 3, -5), (1, 2, -1)])


@pytest.fixture
def t1() -> Problem:
    return make_t1()


@pytest.fixture
def data_dir() -> Path:
    return DATA


def random_feasible(problem, rng: np.random.Generator, complete: bool = False):
    """Random feasible labeling: visit nodes in random order, pick a free candidate or dummy."""
    for _ in range(1000):
        used, y = set(), [-1] * problem.num_nodes
        for i in rng.permutation(problem.num_nodes):
            opts = [int(problem.labels[a]) for a in problem.node_assignments[i]
                    if int(problem.labels[a]) not in used]
            if not complete:
                opts.append(-1)
            if not opts:
                break
            s = opts[rng.integers(len(opts))]
            y[i] = s
            if s >= 0:
                used.add(s)
        else:
            return tuple(y)
    raise RuntimeError("no complete labeling found")


# One line per acceptance criterion, filled by test_acceptance and echoed at the end of the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
