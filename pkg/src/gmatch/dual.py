"""Lagrange decomposition lower bounds and subgradient ascent.

The problem splits into an incomplete LAP over the candidates and a
graphical model over nodes (slots = candidate labels plus dummy) without
label uniqueness.  Multipliers ``lam`` move unary mass between the two.
The graphical model is decomposed further into node factors and one factor
per connected node pair, coupled by multipliers ``phi``; pair factors also
forbid the two nodes from sharing a label, which every feasible matching
satisfies.  ``dual`` runs subgradient ascent on this decomposition;
``fm+dual`` maximizes a smoothed version with L-BFGS and fuses primal
labelings built on the reparametrized costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from .lap import ilap_ids
from .model import Problem, dummy_labeling, labeling_from_ids
from .solvers.base import SolverParams, Tracker
from .solvers.fusion import fuse, greedy


def lower_bound(problem: Problem, lam) -> float:
    """Bound with the LAP taking unary mass ``lam`` and edges relaxed independently.

    ``D = iLAP(lam) + sum_i min(0, min_s (c_is - lam_is)) + sum_e min(0, c_e)``.
    """
    lam = np.asarray(lam, dtype=float)
    ids = ilap_ids(problem, lam)
    d = float(lam[ids].sum())
    reduced = problem.unary - lam
    for ids_i in problem.node_assignments:
        if len(ids_i):
            d += min(0.0, float(reduced[ids_i].min()))
    return d + float(np.minimum(problem.edge_cost, 0.0).sum())


@dataclass
class DualEval:
    value: float
    lap_ids: np.ndarray
    grad_i: np.ndarray
    grad_j: np.ndarray
    reduced: np.ndarray  # per-candidate LAP cost after reparametrization


class PairDecomposition:
    """Node/pair factor decomposition with the LAP share folded in optimally.

    For given pair multipliers ``phi`` the best ``lam`` sets every candidate's
    LAP cost to its reparametrized unary minus its node's dummy value, so the
    bound is a function of ``phi`` alone:
    ``D(phi) = sum_i a_i# + iLAP(a - a#) + sum_p min theta'_p``.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        n = problem.num_nodes
        counts = np.array([len(ids) for ids in problem.node_assignments], dtype=np.int64)
        self.width = 1 + int(counts.max(initial=0))
        w = self.width
        # Slot 0 is the dummy; slots 1.. follow the candidates of the node in label order.
        self.slot = np.zeros(problem.num_assignments, dtype=np.int64)
        self.slot_label = np.full((n, w), -2, dtype=np.int64)
        self.slot_label[:, 0] = -1
        for i, ids in enumerate(problem.node_assignments):
            self.slot[ids] = np.arange(1, len(ids) + 1)
            self.slot_label[i, 1:len(ids) + 1] = problem.labels[ids]
        self.base = np.where(self.slot_label >= -1, 0.0, np.inf)
        self.base[problem.nodes, self.slot] = problem.unary

        a, b = problem.edge_a, problem.edge_b
        na, nb = problem.nodes[a], problem.nodes[b]
        flip = na > nb
        a, b = np.where(flip, b, a), np.where(flip, a, b)
        na, nb = problem.nodes[a], problem.nodes[b]
        pairs, pid = np.unique(na * max(n, 1) + nb, return_inverse=True)
        self.pair_i = (pairs // max(n, 1)).astype(np.int64)
        self.pair_j = (pairs % max(n, 1)).astype(np.int64)
        npairs = len(pairs)
        li = self.slot_label[self.pair_i][:, :, None]
        lj = self.slot_label[self.pair_j][:, None, :]
        valid = (li >= -1) & (lj >= -1) & ~((li == lj) & (li >= 0))
        self.theta = np.where(valid, 0.0, np.inf)
        self.theta[pid, self.slot[a], self.slot[b]] = problem.edge_cost
        self.valid_i = self.slot_label[self.pair_i] >= -1
        self.valid_j = self.slot_label[self.pair_j] >= -1
        ones = np.ones(npairs)
        self.inc_i = sp.csr_matrix((ones, (self.pair_i, np.arange(npairs))), shape=(n, npairs))
        self.inc_j = sp.csr_matrix((ones, (self.pair_j, np.arange(npairs))), shape=(n, npairs))
        self.num_pairs = npairs

    def zeros(self) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros((self.num_pairs, self.width)), np.zeros((self.num_pairs, self.width))

    def node_potentials(self, phi_i: np.ndarray, phi_j: np.ndarray) -> np.ndarray:
        a = self.base.copy()
        if self.num_pairs:
            a += self.inc_i @ phi_i + self.inc_j @ phi_j
        return a

    def evaluate(self, phi_i: np.ndarray, phi_j: np.ndarray) -> DualEval:
        p = self.problem
        a = self.node_potentials(phi_i, phi_j)
        dummy = a[:, 0]
        reduced = a[p.nodes, self.slot] - dummy[p.nodes]
        ids = ilap_ids(p, reduced)
        value = float(dummy.sum() + reduced[ids].sum())
        choice = np.zeros((p.num_nodes, self.width))
        choice[:, 0] = 1.0
        choice[p.nodes[ids], 0] = 0.0
        choice[p.nodes[ids], self.slot[ids]] = 1.0
        grad_i = grad_j = np.zeros((0, self.width))
        if self.num_pairs:
            r = self.theta - phi_i[:, :, None] - phi_j[:, None, :]
            flat = r.reshape(self.num_pairs, -1)
            arg = flat.argmin(axis=1)
            value += float(flat[np.arange(self.num_pairs), arg].sum())
            rows, cols = np.divmod(arg, self.width)
            grad_i = choice[self.pair_i].copy()
            grad_i[np.arange(self.num_pairs), rows] -= 1.0
            grad_j = choice[self.pair_j].copy()
            grad_j[np.arange(self.num_pairs), cols] -= 1.0
        return DualEval(value, ids, grad_i, grad_j, reduced)


class _Polyak:
    """Polyak steps towards ``best E - margin * |best E|``; the margin halves on stalls."""

    def __init__(self, margin: float, patience: int):
        self.margin = margin
        self.patience = patience
        self.stall = 0

    def step(self, best_e: float, d: float, best_d: float, norm2: float) -> float:
        if d > best_d:
            self.stall = 0
        else:
            self.stall += 1
            if self.stall >= self.patience:
                self.margin /= 2.0
                self.stall = 0
        target = best_e - self.margin * max(abs(best_e), 1e-9)
        if target <= d:
            self.margin /= 2.0
            target = max(target, d + 1e-12)
        return (target - d) / norm2 if norm2 > 0 else 0.0


def subgradient_ascend(problem: Problem, params: SolverParams, tracker: Tracker) -> None:
    """Subgradient ascent on the pair decomposition; the LAP solution is the primal each step."""
    dec = PairDecomposition(problem)
    phi_i, phi_j = dec.zeros()
    polyak = _Polyak(params.dual_margin, params.dual_patience)
    best_d = -np.inf
    for _ in range(params.dual_cap):
        ev = dec.evaluate(phi_i, phi_j)
        tracker.offer(labeling_from_ids(problem, ev.lap_ids))
        tracker.offer_bound(ev.value)
        if tracker.certified(params.gap_tol) or tracker.budget.exhausted():
            break
        norm2 = float((ev.grad_i ** 2).sum() + (ev.grad_j ** 2).sum())
        if norm2 == 0.0:
            break
        t = polyak.step(tracker.best_e, ev.value, best_d, norm2)
        best_d = max(best_d, ev.value)
        phi_i = phi_i + t * ev.grad_i * dec.valid_i
        phi_j = phi_j + t * ev.grad_j * dec.valid_j


class SmoothedDual:
    """Node, label and pair factors coupled by ``lam`` (node-label) and ``phi`` (node-pair).

    Every factor contributes the minimum of its reparametrized table, so the
    sum is a lower bound for any multipliers.  Replacing each minimum by a
    softmin at temperature ``tau`` gives a smooth concave surrogate whose
    gradient is the difference of factor marginals.  Label factors choose one
    of their candidates or nobody at cost 0.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        self.dec = dec = PairDecomposition(problem)
        self.size = problem.num_assignments + 2 * dec.num_pairs * dec.width
        la = problem.label_assignments
        width = 1 + max((len(ids) for ids in la), default=0)
        self.label_ids = np.full((problem.num_labels, width), -1, dtype=np.int64)
        for s, ids in enumerate(la):
            self.label_ids[s, 1:len(ids) + 1] = ids
        self.label_live = self.label_ids >= 0
        costs = np.concatenate([np.abs(problem.unary), np.abs(problem.edge_cost)])
        self.scale = float(costs.max()) if len(costs) and costs.max() > 0 else 1.0

    def split(self, v: np.ndarray):
        a = self.problem.num_assignments
        shape = (self.dec.num_pairs, self.dec.width)
        half = shape[0] * shape[1]
        return (v[:a], v[a:a + half].reshape(shape) * self.dec.valid_i,
                v[a + half:].reshape(shape) * self.dec.valid_j)

    def tables(self, v: np.ndarray):
        p, dec = self.problem, self.dec
        lam, phi_i, phi_j = self.split(v)
        node = dec.node_potentials(phi_i, phi_j)
        node[p.nodes, dec.slot] -= lam
        label = np.where(self.label_live, lam[np.maximum(self.label_ids, 0)], np.inf)
        label[:, 0] = 0.0
        pair = dec.theta - phi_i[:, :, None] - phi_j[:, None, :]
        return node, label, pair.reshape(dec.num_pairs, dec.width * dec.width)

    def value(self, v: np.ndarray) -> float:
        """Exact (nonsmooth) bound at ``v``."""
        node, label, pair = self.tables(v)
        d = node.min(axis=1).sum() + label.min(axis=1).sum()
        return float(d + (pair.min(axis=1).sum() if len(pair) else 0.0))

    def reduced(self, v: np.ndarray) -> np.ndarray:
        """Per-candidate node cost relative to the dummy, with ``lam`` given back."""
        p, dec = self.problem, self.dec
        lam, phi_i, phi_j = self.split(v)
        node = dec.node_potentials(phi_i, phi_j)
        return node[p.nodes, dec.slot] - node[p.nodes, 0]

    def smoothed(self, v: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
        """Softmin surrogate and its gradient."""
        p, dec = self.problem, self.dec
        node, label, pair = self.tables(v)
        f_n, mu_n = _softmin(node, tau)
        f_l, mu_l = _softmin(label, tau)
        g_lam = -mu_n[p.nodes, dec.slot]
        live = self.label_live[:, 1:]
        g_lam[self.label_ids[:, 1:][live]] += mu_l[:, 1:][live]
        f = f_n.sum() + f_l.sum()
        if dec.num_pairs:
            f_p, mu_p = _softmin(pair, tau)
            f += f_p.sum()
            mu_p = mu_p.reshape(dec.theta.shape)
            g_i = (mu_n[dec.pair_i] - mu_p.sum(axis=2)) * dec.valid_i
            g_j = (mu_n[dec.pair_j] - mu_p.sum(axis=1)) * dec.valid_j
        else:
            g_i = g_j = np.zeros(0)
        return float(f), np.concatenate([g_lam, g_i.ravel(), g_j.ravel()])


def _softmin(x: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise ``-tau log sum exp(-x / tau)`` and the matching softmax weights."""
    m = x.min(axis=1, keepdims=True)
    e = np.exp((m - x) / tau)
    s = e.sum(axis=1, keepdims=True)
    e /= s
    return m[:, 0] - tau * np.log(s[:, 0]), e


class _Stop(Exception):
    pass


def fm_dual(problem: Problem, params: SolverParams, tracker: Tracker) -> None:
    """Fusion moves driven by a smoothed dual optimized with L-BFGS.

    Temperatures fall geometrically from ``smooth_tau0`` to ``smooth_tau_min``
    (both relative to the largest absolute cost), each stage warm-started.
    Every ``smooth_fuse_every`` iterations the exact bound is recorded, the
    LAP on the reparametrized costs is offered and a greedy labeling built on
    them is fused into the incumbent.
    """
    if problem.num_assignments == 0:
        tracker.offer(dummy_labeling(problem))
        tracker.offer_bound(0.0)
        return
    sd = SmoothedDual(problem)
    rng = np.random.default_rng(params.seed)
    state = {"incumbent": None, "calls": 0}

    def visit(v: np.ndarray) -> bool:
        r = sd.reduced(v)
        tracker.offer(labeling_from_ids(problem, ilap_ids(problem, r)))
        g = greedy(problem, rng, params.fm_epsilon, params.fm_k, unary=r)
        inc = tracker.best_y if state["incumbent"] is None else state["incumbent"]
        state["incumbent"] = fuse(problem, fuse(problem, inc, g), tracker.best_y)
        tracker.offer(state["incumbent"])
        tracker.offer_bound(sd.value(v))
        return tracker.certified(params.gap_tol) or tracker.budget.exhausted()

    def callback(v: np.ndarray) -> None:
        state["calls"] += 1
        if state["calls"] % params.smooth_fuse_every == 0 and visit(v):
            raise _Stop

    v = np.zeros(sd.size)
    if visit(v):
        return
    tau = params.smooth_tau0 * sd.scale
    while tau >= params.smooth_tau_min * sd.scale:
        def negated(x, tau=tau):
            f, g = sd.smoothed(x, tau)
            return -f, -g
        try:
            v = minimize(negated, v, jac=True, method="L-BFGS-B", callback=callback,
                         options={"maxiter": params.smooth_stage_cap}).x
        except _Stop:
            return
        if visit(v):
            return
        tau *= params.smooth_decay
