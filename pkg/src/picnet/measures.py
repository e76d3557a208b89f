"""Permutation-invariant contexts and the exact distances the networks reproduce.

A context is a discrete probability measure ``sum_n w_n delta_{x_n}`` on
pairwise distinct atoms whose weights are positive multiples of ``1/C``.
Weights are kept as integer numerators over ``C`` so membership in the
quantized simplex is an exact test.  The ground metric between atoms is
always the l1 distance.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from picnet.errors import ConfigurationError

DIST_TOL = 1e-9


@dataclass(frozen=True)
class ContextWeights:
    """Weight vector on the quantized simplex, stored as numerators over C."""

    numerators: tuple[int, ...]
    C: int

    def __post_init__(self):
        nums = tuple(int(k) for k in self.numerators)
        object.__setattr__(self, "numerators", nums)
        if self.C < 1:
            raise ConfigurationError(f"context window must be positive, got {self.C}")
        if not nums:
            raise ConfigurationError("weight vector is empty")
        if any(k < 1 or k > self.C for k in nums):
            raise ConfigurationError(f"weights {nums} not in {{1..{self.C}}}/{self.C}")
        if sum(nums) != self.C:
            raise ConfigurationError(f"weights {nums} do not sum to {self.C}")

    @classmethod
    def from_fractions(cls, entries: Sequence, C: int) -> "ContextWeights":
        nums = []
        for e in entries:
            k = Fraction(e) * C
            if k.denominator != 1:
                raise ConfigurationError(f"weight {e} is not a multiple of 1/{C}")
            nums.append(int(k))
        return cls(tuple(nums), C)

    @property
    def N(self) -> int:
        return len(self.numerators)

    @property
    def entries(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(k, self.C) for k in self.numerators)

    def as_array(self) -> np.ndarray:
        return np.array(self.numerators, dtype=float) / self.C

    def permuted(self, perm: Sequence[int]) -> "ContextWeights":
        return ContextWeights(tuple(self.numerators[i] for i in perm), self.C)


def _frozen_array(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ConfigurationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PICMeasure:
    """A permutation-invariant context ``sum_n w_n delta_{x_n}``."""

    atoms: np.ndarray
    weights: ContextWeights

    def __post_init__(self):
        atoms = _frozen_array(self.atoms, 2)
        object.__setattr__(self, "atoms", atoms)
        if atoms.shape[0] != self.weights.N:
            raise ConfigurationError(
                f"{atoms.shape[0]} atoms but {self.weights.N} weights")
        for i, j in itertools.combinations(range(atoms.shape[0]), 2):
            if np.array_equal(atoms[i], atoms[j]):
                raise ConfigurationError(f"atoms {i} and {j} coincide")

    @classmethod
    def uniform(cls, atoms) -> "PICMeasure":
        n = len(atoms)
        return cls(atoms, ContextWeights((1,) * n, n))

    @property
    def C(self) -> int:
        return self.weights.C

    @property
    def N(self) -> int:
        return self.weights.N

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def expanded_atoms(self) -> np.ndarray:
        """The C atoms of mass 1/C obtained by repeating x_n exactly C*w_n times."""
        return np.repeat(self.atoms, self.weights.numerators, axis=0)

    def matrix(self) -> np.ndarray:
        """N x (d+1) matrix with rows (x_n, w_n)."""
        return np.hstack([self.atoms, self.weights.as_array()[:, None]])

    def flat(self) -> np.ndarray:
        return self.matrix().ravel()

    def permuted(self, perm: Sequence[int]) -> "PICMeasure":
        perm = list(perm)
        return PICMeasure(self.atoms[perm], self.weights.permuted(perm))

    def canonical_key(self) -> tuple:
        rows = sorted(zip(map(tuple, self.atoms.tolist()), self.weights.numerators))
        return (self.C, tuple(rows))

    def same_measure(self, other: "PICMeasure") -> bool:
        return self.canonical_key() == other.canonical_key()

    def to_json(self) -> dict:
        return {
            "C": self.C,
            "N": self.N,
            "d": self.d,
            "atoms": self.atoms.tolist(),
            "weights_num": list(self.weights.numerators),
        }

    @classmethod
    def from_json(cls, obj) -> "PICMeasure":
        if isinstance(obj, str):
            obj = json.loads(obj)
        m = cls(obj["atoms"], ContextWeights(tuple(obj["weights_num"]), obj["C"]))
        if m.N != obj["N"] or m.d != obj["d"]:
            raise ConfigurationError("header N/d disagree with atoms")
        return m


@dataclass(frozen=True, eq=False)
class ContextQuery:
    context: PICMeasure
    query: np.ndarray

    def __post_init__(self):
        q = _frozen_array(self.query, 1)
        object.__setattr__(self, "query", q)
        if q.shape[0] != self.context.d:
            raise ConfigurationError(
                f"query has dimension {q.shape[0]}, context has {self.context.d}")

    def flat(self) -> np.ndarray:
        """Network input layout: context rows (x_n, w_n) then the query."""
        return np.concatenate([self.context.flat(), self.query])

    def to_json(self) -> dict:
        return {"context": self.context.to_json(), "query": self.query.tolist()}

    @classmethod
    def from_json(cls, obj) -> "ContextQuery":
        return cls(PICMeasure.from_json(obj["context"]), obj["query"])


@dataclass(frozen=True, eq=False)
class SignedDiscreteMeasure:
    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        masses = np.array(self.masses, dtype=float).ravel()
        if atoms.size == 0:
            atoms = atoms.reshape(0, atoms.shape[1] if atoms.ndim == 2 else 0)
        if atoms.ndim != 2 or atoms.shape[0] != masses.shape[0]:
            raise ConfigurationError("atoms and masses disagree in length")
        if len({tuple(r) for r in atoms.tolist()}) != atoms.shape[0]:
            raise ConfigurationError("atoms of a signed measure must be distinct")
        atoms.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def combine(cls, parts: Sequence[tuple[float, np.ndarray, np.ndarray]]):
        """Sum ``coef * sum_i mass_i delta_{atom_i}`` over parts, merging equal atoms."""
        acc: dict[tuple, float] = {}
        for coef, atoms, masses in parts:
            for a, m in zip(np.asarray(atoms, dtype=float).tolist(), np.ravel(masses)):
                key = tuple(a)
                acc[key] = acc.get(key, 0.0) + coef * float(m)
        keys = sorted(acc)
        if not keys:
            dim = np.asarray(parts[0][1]).shape[1] if parts else 0
            return cls(np.zeros((0, dim)), np.zeros(0))
        return cls(np.array(keys), np.array([acc[k] for k in keys]))


@dataclass(frozen=True, eq=False)
class OutputMeasure:
    """Uniform measure on M atoms in R^D, atoms kept in lexicographic order."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ConfigurationError("an output measure needs at least one atom")
        order = np.lexsort(atoms.T[::-1])
        atoms = atoms[order]
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def M(self) -> int:
        return self.atoms.shape[0]

    @property
    def D(self) -> int:
        return self.atoms.shape[1]

    def signed(self, coef: float = 1.0) -> SignedDiscreteMeasure:
        return SignedDiscreteMeasure.combine([(coef, self.atoms, np.full(self.M, 1.0 / self.M))])


def enumerate_weights(C: int, N: int) -> list[ContextWeights]:
    """All of Delta_{C,N}, lexicographically sorted; empty when C < N."""
    if C < 1 or N < 1:
        raise ConfigurationError("C and N must be positive")
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(ContextWeights(tuple(prefix) + (remaining,), C))
            return
        for k in range(1, remaining - slots + 2):
            rec(prefix + [k], remaining - k, slots - 1)

    if C >= N:
        rec([], C, N)
    return out


def l1_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=-1)


def w1_uniform_atoms(a: np.ndarray, b: np.ndarray, method: str = "hungarian") -> float:
    """W1 between two uniform measures with the same number of (possibly repeated) atoms."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigurationError(f"atom arrays differ in shape: {a.shape} vs {b.shape}")
    n = a.shape[0]
    # a fixed argument order and an exact sum make the value exactly symmetric
    if a.tobytes() > b.tobytes():
        a, b = b, a
    cost = l1_cost_matrix(a, b)
    if method == "hungarian":
        rows, cols = linear_sum_assignment(cost)
        return math.fsum(cost[rows, cols]) / n
    if method == "exhaustive":
        if n > 8:
            raise ConfigurationError("exhaustive W1 limited to 8 atoms")
        idx = np.arange(n)
        return float(min(cost[idx, list(p)].sum() for p in itertools.permutations(range(n))) / n)
    raise ConfigurationError(f"unknown method {method!r}")


def _check_compatible(a: PICMeasure, b: PICMeasure):
    if (a.C, a.N, a.d) != (b.C, b.N, b.d):
        raise ConfigurationError(
            f"measures disagree: (C,N,d)={(a.C, a.N, a.d)} vs {(b.C, b.N, b.d)}")


def w1_oracle(a: PICMeasure, b: PICMeasure, method: str = "hungarian") -> float:
    """Exact W1 (l1 ground cost) via the uniform C-atom expansion and an assignment."""
    _check_compatible(a, b)
    return w1_uniform_atoms(a.expanded_atoms(), b.expanded_atoms(), method=method)


def quotient_dist(X, Y) -> float:
    """min over row permutations P of ||P X - Y||_F, by brute force."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.ndim != 2:
        raise ConfigurationError(f"shape mismatch: {X.shape} vs {Y.shape}")
    best = np.inf
    for p in itertools.permutations(range(X.shape[0])):
        best = min(best, float(np.linalg.norm(X[list(p)] - Y)))
    return best


def kr_norm(m: SignedDiscreteMeasure) -> float:
    """Kantorovich-Rubinstein norm: sup of sum m_i f(z_i) over ||f||_inf + Lip(f) <= 1.

    Solved as an LP in (f_1..f_n, a, b) with |f_i| <= a,
    |f_i - f_j| <= b ||z_i - z_j||_1 and a + b <= 1.
    """
    n = m.masses.shape[0]
    if n == 0 or not np.any(m.masses):
        return 0.0
    D = l1_cost_matrix(m.atoms, m.atoms)
    nv = n + 2
    ia, ib = n, n + 1
    rows = []
    for i in range(n):
        for sign in (1.0, -1.0):
            r = np.zeros(nv)
            r[i] = sign
            r[ia] = -1.0
            rows.append(r)
    for i, j in itertools.permutations(range(n), 2):
        r = np.zeros(nv)
        r[i] = 1.0
        r[j] = -1.0
        r[ib] = -D[i, j]
        rows.append(r)
    budget_row = np.zeros(nv)
    budget_row[ia] = budget_row[ib] = 1.0
    rows.append(budget_row)
    A = np.array(rows)
    rhs = np.zeros(len(rows))
    rhs[-1] = 1.0
    c = np.zeros(nv)
    c[:n] = -m.masses
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = linprog(c, A_ub=A, b_ub=rhs, bounds=bounds, method="highs")
    if not res.success:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(f"KR LP failed: {res.message}")
    return max(0.0, float(-res.fun))


def signed_difference(a_atoms, a_masses, b_atoms, b_masses) -> SignedDiscreteMeasure:
    return SignedDiscreteMeasure.combine([(1.0, a_atoms, a_masses), (-1.0, b_atoms, b_masses)])


def pic_difference(a: PICMeasure, b: PICMeasure) -> SignedDiscreteMeasure:
    return signed_difference(a.atoms, a.weights.as_array(), b.atoms, b.weights.as_array())


def pair_metric(p: ContextQuery, q: ContextQuery) -> float:
    """W1 between contexts plus the l1 distance between queries."""
    if p.query.shape != q.query.shape:
        raise ConfigurationError("queries differ in dimension")
    return w1_oracle(p.context, q.context) + float(np.abs(p.query - q.query).sum())


def pairwise_pair_metric(points: Sequence[ContextQuery], others: Sequence[ContextQuery] | None = None) -> np.ndarray:
    """Matrix of pair_metric values; symmetric fill when ``others`` is omitted."""
    if others is None:
        n = len(points)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = pair_metric(points[i], points[j])
        return out
    return np.array([[pair_metric(p, q) for q in others] for p in points])
