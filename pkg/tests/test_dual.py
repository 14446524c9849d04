import numpy as np
import pytest

from gmatch import Problem
from gmatch.bench.generators import random_problem
from gmatch.dual import PairDecomposition, SmoothedDual, lower_bound
from gmatch.solvers import SolverParams, solve

from oracles import enumerate_optimum


def test_lower_bound_t1_zero_multipliers(t1):
    # 0 (iLAP of zeros) + (-2) + (-3) node minima + (-5) + (-1) edges.
    assert lower_bound(t1, np.zeros(4)) == -11.0


def test_lower_bound_tight_on_edge_free():
    p = Problem(3, 2, [(0, 0, -1.0), (1, 0, -2.0), (1, 1, 0.5), (2, 1, -0.25)])
    assert lower_bound(p, p.unary) == enumerate_optimum(p)[0] == -2.25


def test_lower_bound_random_multipliers():
    rng = np.random.default_rng(0)
    for seed in range(50):
        p = random_problem(seed, 5, 5)
        opt = enumerate_optimum(p)[0]
        for _ in range(5):
            lam = rng.normal(scale=3.0, size=p.num_assignments)
            assert lower_bound(p, lam) <= opt + 1e-9


def test_pair_decomposition_bounds():
    rng = np.random.default_rng(1)
    for seed in range(30):
        p = random_problem(seed, 5, 5)
        opt = enumerate_optimum(p)[0]
        dec = PairDecomposition(p)
        for _ in range(5):
            phi_i, phi_j = (rng.normal(size=z.shape) for z in dec.zeros())
            assert dec.evaluate(phi_i * dec.valid_i, phi_j * dec.valid_j).value <= opt + 1e-9


def test_smoothed_dual_bounds_and_gradient():
    rng = np.random.default_rng(2)
    for seed in range(20):
        p = random_problem(seed, 4, 4)
        if p.num_assignments == 0:
            continue
        opt = enumerate_optimum(p)[0]
        sd = SmoothedDual(p)
        v = rng.normal(size=sd.size)
        assert sd.value(v) <= opt + 1e-9
        f, g = sd.smoothed(v, 0.5)
        assert f <= sd.value(v) + 1e-12
        # Central differences along a random direction.
        d = rng.normal(size=sd.size)
        h = 1e-5
        fd = (sd.smoothed(v + h * d, 0.5)[0] - sd.smoothed(v - h * d, 0.5)[0]) / (2 * h)
        assert fd == pytest.approx(float(g @ d), rel=1e-4, abs=1e-6)


def test_edge_free_gap_closes_first_iteration():
    p = Problem(2, 3, [(0, 0, -1.0), (0, 2, -2.0), (1, 2, -4.0)])
    r = solve(p, "dual")
    assert r.energy == r.bound == enumerate_optimum(p)[0] == -5.0
    assert next(t.bound for t in r.trace if t.bound is not None) == -5.0


@pytest.mark.parametrize("solver", ["dual", "fm+dual"])
def test_t1_certified_within_caps(t1, solver):
    r = solve(t1, solver, SolverParams(dual_cap=1000))
    assert r.energy == -7.0
    assert (r.energy - r.bound) / 7.0 <= 1e-3


def test_dual_traces_monotone():
    for seed in range(20):
        p = random_problem(seed)
        r = solve(p, "dual", SolverParams(dual_cap=200))
        bounds = [t.bound for t in r.trace if t.bound is not None]
        assert bounds == sorted(bounds)
        energies = [t.energy for t in r.trace]
        assert energies == sorted(energies, reverse=True)
        assert r.bound <= enumerate_optimum(p)[0] + 1e-9
