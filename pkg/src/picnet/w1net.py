"""Compiled Wasserstein-1 networks with an l1 ground cost.

Three constructions, from specific to general:

* :func:`build_w1_uniform` for uniform weights, as a minimum over all N!
  matchings;
* :func:`build_w1_fixed_weights` for one pair of weight vectors, as a minimum
  over the vertices of the transport polytope;
* :func:`build_w1_contextual` for all weights in the quantized simplex, by
  gating one fixed-weight network per weight pair.

Inputs are flat vectors.  The first two take ``(X.ravel(), Y.ravel())`` with
``X, Y`` of shape ``(N, d)``; the contextual net takes the two context
matrices ``[X | w]`` and ``[Y | v]`` of shape ``(N, d + 1)`` flattened row by
row.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from picnet.budget import budget
from picnet.errors import CapacityError, ConfigurationError
from picnet.measures import ContextWeights, enumerate_weights
from picnet.netbuilder import (
    CompiledNet,
    build_l1_norm,
    build_min,
    build_mult,
    build_threshold,
    compose,
    linear_net,
    parallelize,
    postcompose_linear,
    precompose_affine,
)

# Size constants for build_w1_uniform: depth <= DEPTH_CONST * N * (d + log2 N!)
# and width <= WIDTH_CONST * N! * N**2 * d.  The construction reaches depth
# d + ceil(log2 N!) and width N! * N * (d + 1).
DEPTH_CONST = 1
WIDTH_CONST = 2


@dataclass(frozen=True)
class TransportVertex:
    """Vertex of the transport polytope U(w, v), stored with exact entries."""

    plan: tuple[tuple[Fraction, ...], ...]
    w: ContextWeights
    v: ContextWeights

    def __post_init__(self):
        n = self.w.N
        if len(self.plan) != n or any(len(row) != n for row in self.plan):
            raise ConfigurationError("plan shape does not match the marginals")
        if any(p < 0 for row in self.plan for p in row):
            raise ConfigurationError("plan entries must be nonnegative")
        if tuple(sum(row) for row in self.plan) != tuple(self.w.entries):
            raise ConfigurationError("row sums differ from w")
        if tuple(sum(col) for col in zip(*self.plan)) != tuple(self.v.entries):
            raise ConfigurationError("column sums differ from v")

    @property
    def support_size(self) -> int:
        return sum(1 for row in self.plan for p in row if p)

    def as_array(self) -> np.ndarray:
        return np.array([[float(p) for p in row] for row in self.plan])


def _check_pair(w: ContextWeights, v: ContextWeights) -> None:
    if w.N != v.N or w.C != v.C:
        raise ConfigurationError(f"marginals disagree: (C={w.C}, N={w.N}) vs (C={v.C}, N={v.N})")


def _solve_tree(edges, w, v) -> list[Fraction] | None:
    """Edge values of the unique plan supported on a spanning tree of K_{N,N}.

    Nodes 0..N-1 are rows and N..2N-1 columns.  Leaves are peeled one at a time:
    a leaf's residual mass fixes its only edge.  Returns None if ``edges`` is
    not a spanning tree or the marginal system is inconsistent.
    """
    n = len(w)
    residual = list(w) + list(v)
    incident = [set() for _ in range(2 * n)]
    for e, (i, j) in enumerate(edges):
        incident[i].add(e)
        incident[n + j].add(e)
    values: list[Fraction | None] = [None] * len(edges)
    leaves = [u for u in range(2 * n) if len(incident[u]) == 1]
    while leaves:
        u = leaves.pop()
        if len(incident[u]) != 1:
            continue
        e = incident[u].pop()
        i, j = edges[e]
        other = n + j if u == i else i
        values[e] = residual[u]
        residual[u] = Fraction(0)
        residual[other] -= values[e]
        incident[other].discard(e)
        if len(incident[other]) == 1:
            leaves.append(other)
    if any(val is None for val in values) or any(residual):
        return None
    return values


def enumerate_transport_vertices(w: ContextWeights, v: ContextWeights) -> list[TransportVertex]:
    """All vertices of U(w, v) from spanning trees of the bipartite graph K_{N,N}.

    Every basic feasible solution is supported on a spanning tree (extended
    arbitrarily when degenerate), so scanning the (2N - 1)-edge subsets that
    form trees and keeping nonnegative solutions finds each vertex at least
    once.  Duplicates are removed exactly.
    """
    _check_pair(w, v)
    n = w.N
    cells = [(i, j) for i in range(n) for j in range(n)]
    n_candidates = math.comb(n * n, 2 * n - 1)
    if n_candidates > budget("vertex_candidates"):
        raise CapacityError(f"{n_candidates} edge subsets exceed the vertex budget")
    wf, vf = w.entries, v.entries
    seen = {}
    for edges in itertools.combinations(cells, 2 * n - 1):
        values = _solve_tree(edges, wf, vf)
        if values is None or any(val < 0 for val in values):
            continue
        plan = [[Fraction(0)] * n for _ in range(n)]
        for (i, j), val in zip(edges, values):
            plan[i][j] = val
        key = tuple(tuple(row) for row in plan)
        seen.setdefault(key, None)
    return [TransportVertex(key, w, v) for key in sorted(seen)]


def _pair_difference(N: int, d: int, pairs) -> sp.csr_matrix:
    """Rows computing x_i - y_j for each (i, j) in ``pairs`` from (X.ravel(), Y.ravel())."""
    rows, cols, vals = [], [], []
    for p, (i, j) in enumerate(pairs):
        for c in range(d):
            r = p * d + c
            rows += [r, r]
            cols += [i * d + c, N * d + j * d + c]
            vals += [1.0, -1.0]
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(pairs) * d, 2 * N * d))


def _cost_stack(N: int, d: int, pairs) -> CompiledNet:
    """Net returning ||x_i - y_j||_1 for each listed pair."""
    stack = parallelize([build_l1_norm(d)] * len(pairs), deep=False)
    return precompose_affine(stack, _pair_difference(N, d, pairs))


def build_w1_uniform(N: int, d: int) -> CompiledNet:
    """min over permutations pi of (1/N) sum_n ||x_n - y_pi(n)||_1."""
    if N < 1 or d < 1:
        raise ConfigurationError("N and d must be positive")
    if N > budget("uniform_n"):
        raise CapacityError(f"N={N} exceeds the permutation budget {budget('uniform_n')}")
    perms = list(itertools.permutations(range(N)))
    pairs = [(n, pi[n]) for pi in perms for n in range(N)]
    costs = _cost_stack(N, d, pairs)
    average = sp.kron(sp.identity(len(perms)), np.full((1, N), 1.0 / N), format="csr")
    net = compose(build_min(len(perms)), postcompose_linear(costs, average))
    return net.with_meta(role="w1_uniform", N=N, d=d)


def build_w1_fixed_weights(w: ContextWeights, v: ContextWeights, d: int) -> CompiledNet:
    """min_k <cost, P_k> over the transport vertices P_k of U(w, v).

    The N^2 cost gadgets feed a linear layer holding the vertex plans, which
    is then reduced by a min tree.
    """
    _check_pair(w, v)
    if d < 1:
        raise ConfigurationError("d must be positive")
    N = w.N
    vertices = enumerate_transport_vertices(w, v)
    pairs = [(i, j) for i in range(N) for j in range(N)]
    costs = _cost_stack(N, d, pairs)
    plans = np.array([vx.as_array().ravel() for vx in vertices])
    net = compose(build_min(len(vertices)), postcompose_linear(costs, plans))
    return net.with_meta(role="w1_fixed", N=N, d=d, C=w.C,
                         w_num=list(w.numerators), v_num=list(v.numerators), K=len(vertices))


def build_w1_contextual(C: int, N: int, d: int) -> CompiledNet:
    """W1 between two contexts with arbitrary weights in the quantized simplex.

    For every weight pair (w~, v~) a threshold gate on ||(w, v) - (w~, v~)||_1
    is multiplied with the fixed-weight net for (w~, v~), and the products are
    summed.  Distinct weight pairs are at least 2/C apart in l1 while the gate
    vanishes from 1/(2C) on, so for on-grid weights exactly one gate is open.
    """
    if min(C, N, d) < 1:
        raise ConfigurationError("C, N and d must be positive")
    weights = enumerate_weights(C, N)
    if not weights:
        raise ConfigurationError(f"no positive weights with C={C} < N={N}")
    weight_pairs = list(itertools.product(weights, repeat=2))
    if len(weight_pairs) > budget("weight_pairs"):
        raise CapacityError(f"{len(weight_pairs)} weight pairs exceed the budget {budget('weight_pairs')}")

    row = d + 1
    in_dim = 2 * N * row
    atom_cols = [b * N * row + n * row + c for b in range(2) for n in range(N) for c in range(d)]
    weight_cols = [b * N * row + n * row + d for b in range(2) for n in range(N)]
    pick_atoms = sp.csr_matrix((np.ones(len(atom_cols)), (np.arange(len(atom_cols)), atom_cols)),
                               shape=(len(atom_cols), in_dim))
    pick_weights = sp.csr_matrix((np.ones(len(weight_cols)), (np.arange(len(weight_cols)), weight_cols)),
                                 shape=(len(weight_cols), in_dim))

    gate = compose(build_threshold(C), build_l1_norm(2 * N))
    branches, selectors, offsets = [], [], []
    for w, v in weight_pairs:
        target = np.concatenate([w.as_array(), v.as_array()])
        branches += [gate, build_w1_fixed_weights(w, v, d)]
        selectors += [pick_weights, pick_atoms]
        offsets += [-target, np.zeros(len(atom_cols))]
    P = len(weight_pairs)
    stacked = precompose_affine(parallelize(branches, deep=False),
                                sp.vstack(selectors, format="csr"), np.concatenate(offsets))
    # outputs arrive as (g_1, f_1, g_2, f_2, ...); the product gadget wants (g..., f...)
    order = list(range(0, 2 * P, 2)) + list(range(1, 2 * P, 2))
    regroup = sp.csr_matrix((np.ones(2 * P), (np.arange(2 * P), order)), shape=(2 * P, 2 * P))
    gated_sum = compose(postcompose_linear(build_mult(P), np.ones((1, P))), linear_net(regroup))
    return compose(gated_sum, stacked).with_meta(role="w1_contextual", C=C, N=N, d=d,
                                                 weight_pairs=P)


def contextual_input(a, b) -> np.ndarray:
    """Flat input of :func:`build_w1_contextual` for two context measures."""
    return np.concatenate([a.matrix().ravel(), b.matrix().ravel()])


def uniform_input(a, b) -> np.ndarray:
    """Flat input ``(X.ravel(), Y.ravel())`` of the uniform and fixed-weight nets."""
    return np.concatenate([np.asarray(a.atoms).ravel(), np.asarray(b.atoms).ravel()])
