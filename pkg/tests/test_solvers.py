import numpy as np
import pytest

from gmatch import DUMMY, InfeasibleError, PreconditionError, Problem, evaluate, is_feasible
from gmatch.bench.generators import random_problem
from gmatch.solvers import SOLVERS, Budget, SolverParams, Tracker, solve
from gmatch.solvers.fusion import fuse, greedy
from gmatch.solvers.sinkhorn import sinkhorn, sinkhorn_log
from gmatch.solvers.spectral import rrwm, sm
from gmatch.transforms import negate_for_max

from conftest import random_feasible
from oracles import enumerate_optimum

ITERATIVE = [s for s in SOLVERS if s != "lap"]


@pytest.mark.parametrize("solver", ITERATIVE)
def test_every_solver_on_t1(t1, solver):
    r = solve(t1, solver, SolverParams(budget=2.0))
    assert is_feasible(t1, r.labeling)
    assert r.energy == evaluate(t1, r.labeling) >= -7.0
    assert r.energy <= 0.0
    energies = [p.energy for p in r.trace]
    assert energies == sorted(energies, reverse=True)
    times = [p.elapsed for p in r.trace]
    assert all(a < b for a, b in zip(times, times[1:]))


@pytest.mark.parametrize("solver", ["fm", "dual", "fm+dual"])
def test_t1_reaches_optimum(t1, solver):
    # Oracle: -7 is the optimum of T1.
    assert solve(t1, solver).energy == -7.0


@pytest.mark.parametrize("solver", ["ipfpu", "ipfps", "fw"])
def test_t1_linearization_methods(t1, solver):
    # fw starts from the iLAP vertex {0->1, 1->0} (E = -6), where the
    # linearized LAP returns the same vertex; -6 is a local optimum.
    assert solve(t1, solver).energy <= -6.0


@pytest.mark.parametrize("solver", ["dual", "fm+dual"])
def test_t1_certified(t1, solver):
    r = solve(t1, solver)
    assert r.bound is not None and r.energy - r.bound <= 1e-3 * 7 + 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_fm_any_seed_t1(t1, seed):
    assert solve(t1, "fm", SolverParams(seed=seed, fm_generations=100)).energy == -7.0


def test_sm_identity_instance():
    p = Problem(2, 2, [(0, 0, -1.0), (1, 1, -1.0)])
    assert solve(p, "sm").labeling == (0, 1)


def test_sm_oracle_gap_on_random_square():
    for seed in range(30):
        p = random_problem(1000 + seed, 4, 4)
        r = solve(p, "sm")
        assert is_feasible(p, r.labeling)
        assert r.energy >= enumerate_optimum(p)[0] - 1e-9


def test_sm_returns_nonnegative_vector(t1):
    w = negate_for_max(t1)
    x = sm(w, SolverParams(), Tracker(w, Budget(1.0)))
    assert np.all(x >= 0)


def test_rrwm_pure_walk_symmetric():
    p = negate_for_max(Problem(2, 2, [(0, 0, -1.0), (1, 1, -1.0)], [(0, 1, -1.0)]))
    x = rrwm(p, SolverParams(rrwm_alpha=1.0), Tracker(p, Budget(1.0)))
    assert x == pytest.approx([0.5, 0.5])
    assert np.all(x >= 0) and x.sum() == pytest.approx(1.0)


def test_sinkhorn_uniform_and_sums():
    assert np.allclose(sinkhorn(np.ones((4, 4))), 0.25)
    rng = np.random.default_rng(0)
    m, _ = sinkhorn_log(rng.normal(size=(5, 5)) * 3, tol=1e-9, cap=1000)
    assert np.allclose(m.sum(axis=0), 1, atol=1e-6) and np.allclose(m.sum(axis=1), 1, atol=1e-6)


def test_sinkhorn_log_fallback_extreme_logits():
    logm = np.array([[0.0, -2000.0], [-2000.0, -4000.0]])
    m, _ = sinkhorn_log(logm, tol=1e-9, cap=500)
    assert np.all(np.isfinite(m)) and np.allclose(m.sum(axis=1), 1, atol=1e-6)


def test_sinkhorn_empty_rows_stay_empty():
    logm = np.array([[0.0, -np.inf], [-np.inf, -np.inf]])
    m, _ = sinkhorn_log(logm)
    assert m[1].sum() == 0 and m[0, 0] == pytest.approx(1.0)


def test_ga_not_worse_than_sm_on_average():
    gaps = {"sm": [], "ga": []}
    for seed in range(30):
        p = random_problem(2000 + seed, 4, 4)
        opt = enumerate_optimum(p)[0]
        for s in gaps:
            gaps[s].append(solve(p, s).energy - opt)
    assert np.mean(gaps["ga"]) <= np.mean(gaps["sm"])


def test_fw_edge_free_stops_at_ilap_optimum():
    p = Problem(3, 3, [(0, 0, -1.0), (0, 1, -3.0), (1, 1, -2.0), (2, 2, 1.0)])
    r = solve(p, "fw")
    assert r.energy == enumerate_optimum(p)[0] == -3.0
    assert len(r.trace) == 1


def test_ipfp_from_optimum_stays(t1):
    from gmatch.solvers.linearization import ipfp
    from gmatch.model import indicator

    w = negate_for_max(t1)
    tr = Tracker(t1, Budget(1.0))
    ipfp(w, SolverParams(), tr, x0=indicator(t1, (0, 1)))
    assert tr.best_e == -7.0


def test_greedy_feasible_and_deterministic():
    p = random_problem(4)
    for eps in (0.0, 0.5):
        a = greedy(p, np.random.default_rng(1), eps, 3)
        b = greedy(p, np.random.default_rng(1), eps, 3)
        assert is_feasible(p, a) and a == b


def test_fuse_contract():
    rng = np.random.default_rng(0)
    for seed in range(60):
        p = random_problem(seed)
        ya, yb = random_feasible(p, rng), random_feasible(p, rng)
        y = fuse(p, ya, yb)
        assert is_feasible(p, y)
        assert evaluate(p, y) <= min(evaluate(p, ya), evaluate(p, yb)) + 1e-12
        assert fuse(p, ya, ya) == ya


def test_fuse_t1_complete_parents(t1):
    assert evaluate(t1, fuse(t1, (1, 0), (0, 1))) == -7.0
    with pytest.raises(InfeasibleError):
        fuse(t1, (0, 0), (0, 1))


def test_fusion_incumbent_monotone():
    p = random_problem(9)
    rng = np.random.default_rng(2)
    inc = random_feasible(p, rng)
    for _ in range(100):
        new = fuse(p, inc, greedy(p, rng, 0.3, 3))
        assert evaluate(p, new) <= evaluate(p, inc) + 1e-12
        inc = new


def test_lap_solver_edge_free_only(t1):
    p = Problem(2, 2, [(0, 0, -1.0), (1, 0, -3.0), (1, 1, -1.0)])
    r = solve(p, "lap")
    assert r.energy == r.bound == -3.0
    with pytest.raises(PreconditionError):
        solve(t1, "lap")


def test_unknown_solver_and_bad_params(t1):
    with pytest.raises(PreconditionError):
        solve(t1, "nope")
    with pytest.raises(PreconditionError):
        SolverParams(budget=0)
    with pytest.raises(PreconditionError):
        SolverParams(fm_k=0)
    with pytest.raises(PreconditionError):
        SolverParams.from_dict({"speed": 1})
    assert SolverParams.from_dict(SolverParams(seed=3).to_dict()) == SolverParams(seed=3)


def test_empty_problem_all_solvers():
    p = Problem(2, 2)
    for s in SOLVERS:
        r = solve(p, s)
        assert r.labeling == (DUMMY, DUMMY) and r.energy == 0.0


def test_bijective_flag_skips_embedding():
    p = random_problem(21, 4, 4)
    r = solve(p, "sm", SolverParams(bijective=True))
    assert is_feasible(p, r.labeling)


@pytest.mark.parametrize("solver", ITERATIVE)
def test_repeatable(solver):
    p = random_problem(77)
    a = solve(p, solver, SolverParams(seed=5))
    b = solve(p, solver, SolverParams(seed=5))
    assert a.labeling == b.labeling and a.energy == b.energy
