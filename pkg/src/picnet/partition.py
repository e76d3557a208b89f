"""Packings, retracted Voronoi cells and the piecewise-constant approximator.

The sample space is a finite list of :class:`~picnet.measures.ContextQuery`
points with the metric ``pair_metric`` (W1 between contexts plus l1 between
queries).  Given a delta-packing with landmarks ``z_1, ..., z_K`` (in greedy
selection order) the retracted cells are::

    C_k = B(z_k, delta_star) minus the union of B(z_j, delta) over j < k

with open balls.  The trifling region is the union of the annuli
``delta_star <= dist(z_k, .) < delta``; everything else is the approximation
region, on which the compiled indicator networks are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from picnet.errors import ConfigurationError
from picnet.measures import (
    ContextQuery,
    OutputMeasure,
    SignedDiscreteMeasure,
    kr_norm,
    pair_metric,
    pairwise_pair_metric,
    w1_uniform_atoms,
)
from picnet.netbuilder import (
    CompiledNet,
    build_l1_norm,
    build_mult,
    build_scalar_bump,
    compose,
    constant_net,
    identity_net,
    parallelize,
    postcompose_linear,
    precompose_affine,
)
from picnet.w1net import build_w1_contextual

TRIFLING = -1


@dataclass(frozen=True)
class ModulusOfContinuity:
    evaluator: Callable[[float], float]
    inverse_evaluator: Callable[[float], float] | None = None

    def __post_init__(self):
        grid = np.linspace(0.0, 10.0, 201)
        vals = np.array([self.evaluator(t) for t in grid])
        if vals[0] != 0.0 or np.any(np.diff(vals) < 0):
            raise ConfigurationError("a modulus of continuity must vanish at 0 and be nondecreasing")

    @classmethod
    def linear(cls, L: float) -> "ModulusOfContinuity":
        if L < 0:
            raise ConfigurationError("Lipschitz constant must be nonnegative")
        inverse = (lambda e: e / L) if L > 0 else (lambda e: np.inf)
        return cls(lambda t: L * t, inverse)

    def __call__(self, t: float) -> float:
        return float(self.evaluator(t))

    def inverse(self, eps: float) -> float:
        if self.inverse_evaluator is None:
            raise ConfigurationError("no inverse supplied")
        return float(self.inverse_evaluator(eps))


@dataclass(frozen=True)
class TargetFunction:
    """Map from context-query pairs to uniform output measures with Lipschitz constant L."""

    evaluator: Callable[[ContextQuery], OutputMeasure]
    lipschitz_constant: float
    name: str = "target"
    omega: ModulusOfContinuity | None = None

    def __call__(self, p: ContextQuery) -> OutputMeasure:
        return self.evaluator(p)

    @property
    def modulus(self) -> ModulusOfContinuity:
        return self.omega if self.omega is not None else ModulusOfContinuity.linear(self.lipschitz_constant)

    def empirical_lipschitz(self, samples: Sequence[ContextQuery], pairs=None) -> float:
        """Largest W1(f(p), f(q)) / pair_metric(p, q) over the given index pairs (all pairs by default)."""
        outs = [self(p).atoms for p in samples]
        if pairs is None:
            pairs = [(i, j) for i in range(len(samples)) for j in range(i + 1, len(samples))]
        ratio = 0.0
        for i, j in pairs:
            dist = pair_metric(samples[i], samples[j])
            if dist > 0:
                ratio = max(ratio, w1_uniform_atoms(outs[i], outs[j]) / dist)
        return ratio


@dataclass(frozen=True, eq=False)
class Packing:
    landmarks: tuple[ContextQuery, ...]
    delta: float
    delta_star: float
    distances: np.ndarray = field(default=None, repr=False)
    indices: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.landmarks:
            raise ConfigurationError("a packing needs at least one landmark")
        if not 0 < self.delta_star < self.delta:
            raise ConfigurationError(f"need 0 < delta_star < delta, got {self.delta_star}, {self.delta}")
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        D = self.distances if self.distances is not None else pairwise_pair_metric(self.landmarks)
        D = np.array(D, dtype=float)
        off = D[~np.eye(len(self.landmarks), dtype=bool)]
        if off.size and off.min() < self.delta:
            raise ConfigurationError("landmarks are closer than delta")
        D.setflags(write=False)
        object.__setattr__(self, "distances", D)

    @property
    def K(self) -> int:
        return len(self.landmarks)

    def with_delta_star(self, delta_star: float) -> "Packing":
        return Packing(self.landmarks, self.delta, delta_star, self.distances, self.indices)


@dataclass(frozen=True, eq=False)
class CellAssignment:
    """Cell index per sample, or TRIFLING (-1)."""

    labels: np.ndarray
    distances: np.ndarray = field(repr=False)

    @property
    def trifling(self) -> np.ndarray:
        return self.labels == TRIFLING

    def membership(self, K: int) -> np.ndarray:
        """(n, K) 0/1 matrix of cell membership."""
        out = np.zeros((self.labels.shape[0], K))
        inside = ~self.trifling
        out[np.flatnonzero(inside), self.labels[inside]] = 1.0
        return out


def greedy_packing(samples: Sequence[ContextQuery], delta: float, delta_star: float | None = None,
                   distances: np.ndarray | None = None) -> Packing:
    """Farthest-point delta-packing of the samples, starting from sample 0.

    Selection stops once every sample lies within delta of a landmark, so the
    result is a maximal packing and hence a delta-net of the sample set.  Ties
    go to the lowest index.  ``delta_star`` defaults to ``delta / 2``.
    """
    if not samples:
        raise ConfigurationError("no samples to pack")
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    chosen = [0]
    rows = [distances[0] if distances is not None else
            np.array([pair_metric(samples[0], q) for q in samples])]
    nearest = rows[0].copy()
    while True:
        far = int(np.argmax(nearest))
        if nearest[far] < delta:
            break
        chosen.append(far)
        row = distances[far] if distances is not None else np.array([pair_metric(samples[far], q) for q in samples])
        rows.append(row)
        nearest = np.minimum(nearest, row)
    landmark_dist = np.array([[r[j] for j in chosen] for r in rows])
    landmark_dist = np.maximum(landmark_dist, landmark_dist.T)
    return Packing(tuple(samples[i] for i in chosen), delta,
                   delta / 2 if delta_star is None else delta_star, landmark_dist, tuple(chosen))


def landmark_distances(packing: Packing, samples: Sequence[ContextQuery]) -> np.ndarray:
    """(n, K) matrix of pair_metric from each sample to each landmark."""
    return pairwise_pair_metric(list(samples), list(packing.landmarks))


def _labels(dist: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """First k with dist_k < inner and dist_j >= outer for all j < k, else -1."""
    n, K = dist.shape
    labels = np.full(n, TRIFLING)
    blocked = np.zeros(n, dtype=bool)
    for k in range(K):
        hit = ~blocked & (labels == TRIFLING) & (dist[:, k] < inner)
        labels[hit] = k
        blocked |= dist[:, k] < outer
    return labels


def assign_cells(packing: Packing, samples: Sequence[ContextQuery],
                 distances: np.ndarray | None = None) -> CellAssignment:
    """Label samples by retracted cell; annulus points and uncovered points are TRIFLING."""
    dist = landmark_distances(packing, samples) if distances is None else np.asarray(distances)
    labels = _labels(dist, packing.delta_star, packing.delta)
    annulus = np.any((dist >= packing.delta_star) & (dist < packing.delta), axis=1)
    labels[annulus] = TRIFLING
    return CellAssignment(labels, dist)


def pwc_approximator(packing: Packing, f: TargetFunction):
    """Landmark values nu_k = f(z_k) and the evaluator returning nu_k on the delta-cell of k.

    A point outside every delta-ball (possible only off the packed sample
    set) falls back to its nearest landmark.
    """
    values = [f(z) for z in packing.landmarks]

    def evaluate(p: ContextQuery) -> OutputMeasure:
        dist = np.array([pair_metric(p, z) for z in packing.landmarks])
        k = int(_labels(dist[None, :], packing.delta, packing.delta)[0])
        return values[int(np.argmin(dist)) if k == TRIFLING else k]

    return values, evaluate


# ---------------------------------------------------------------------------
# compiled indicators


def _landmark_gate(packing: Packing, k: int, w1: CompiledNet) -> CompiledNet:
    """s -> bump(W1(mu, mu^k) + ||x - x^k||_1) on the flat context-query input."""
    z = packing.landmarks[k]
    N, d = z.context.N, z.context.d
    ctx = N * (d + 1)
    in_dim = ctx + d
    # W1 net input: (mu rows, mu^k rows); the second block is a constant
    to_w1 = sp.vstack([sp.eye(ctx, in_dim, format="csr"), sp.csr_matrix((ctx, in_dim))], format="csr")
    w1_k = precompose_affine(w1, to_w1, np.concatenate([np.zeros(ctx), z.context.flat()]))
    to_query = sp.eye(d, in_dim, k=ctx, format="csr")
    l1_k = precompose_affine(build_l1_norm(d), to_query, -z.query)
    both = parallelize([w1_k, l1_k], deep=False)
    # the two branches read the same input: stack two copies of it
    dup = sp.vstack([sp.identity(in_dim, format="csr")] * 2, format="csr")
    dist = postcompose_linear(precompose_affine(both, dup), np.ones((1, 2)))
    return compose(build_scalar_bump(packing.delta_star, packing.delta), dist)


def _sweep_step(K: int, k: int) -> CompiledNet:
    """One step of the sequential cell subtraction.

    State before step k (0-based): ``(g_k, ..., g_{K-1}, P_k, Phi_0, ..., Phi_{k-1})``,
    where ``P_k = prod_{j<k} (1 - g_j)`` is omitted for k = 0 (it equals 1).
    The step forms ``Phi_k = g_k P_k`` and ``P_{k+1} = P_k (1 - g_k)`` with one
    product layer and carries everything else through identity neurons.
    """
    n_g = K - k
    has_p = k > 0
    width = n_g + int(has_p) + k
    p_col = n_g if has_p else None
    rest = list(range(1, n_g)) + ([n_g + 1 + j for j in range(k)] if has_p else [])
    # mult input (x1, x2, y1, y2) = (g_k, P_k, P_k, 1 - g_k)
    rows = np.zeros((4 + len(rest), width))
    c = np.zeros(4 + len(rest))
    rows[0, 0] = 1.0
    if has_p:
        rows[1, p_col] = rows[2, p_col] = 1.0
    else:
        c[1] = c[2] = 1.0
    rows[3, 0] = -1.0
    c[3] = 1.0
    for r, col in enumerate(rest):
        rows[4 + r, col] = 1.0
    core = build_mult(2)
    if rest:
        core = parallelize([core, identity_net(len(rest))], deep=False)
    step = precompose_affine(core, rows, c)
    # outputs (Phi_k, P_{k+1}, g_{k+1}.., Phi_0..Phi_{k-1}) -> (g.., P_{k+1}, Phi_0..Phi_k)
    n_out = 2 + len(rest)
    n_g_next = n_g - 1
    order = np.zeros((n_out, n_out))
    for i in range(n_g_next):
        order[i, 2 + i] = 1.0
    order[n_g_next, 1] = 1.0
    for j in range(k):
        order[n_g_next + 1 + j, 2 + n_g_next + j] = 1.0
    order[n_g_next + 1 + k, 0] = 1.0
    return postcompose_linear(step, order)


def build_partition_net(packing: Packing) -> CompiledNet:
    """Joint network returning (Phi_0, ..., Phi_{K-1}) on the flat context-query input.

    Stage one computes the ball gates ``g_k = bump(dist(., z_k))`` in
    parallel, with the compiled contextual W1 net and an l1 net for the
    query.  Stage two runs the cell subtraction
    ``Phi_k = g_k prod_{j<k} (1 - g_j)`` one landmark per layer.  Away from
    the trifling region every gate is exactly 0 or 1, so the outputs are the
    cell indicators.

    Sizes: depth = depth(W1 net) + 2 + K, width <= K * (width(W1 net) + d + 1) + 4.
    """
    z0 = packing.landmarks[0].context
    C, N, d = z0.C, z0.N, z0.d
    w1 = build_w1_contextual(C, N, d)
    K = packing.K
    in_dim = N * (d + 1) + d
    gates = [_landmark_gate(packing, k, w1) for k in range(K)]
    fan = sp.vstack([sp.identity(in_dim, format="csr")] * K, format="csr")
    net = precompose_affine(parallelize(gates, deep=False), fan)
    for k in range(K):
        net = compose(_sweep_step(K, k), net)
    # final state (P_K, Phi_0..Phi_{K-1})
    drop_p = sp.eye(K, K + 1, k=1, format="csr")
    return postcompose_linear(net, drop_p).with_meta(role="partition", K=K, C=C, N=N, d=d,
                                                    delta=packing.delta, delta_star=packing.delta_star)


def build_indicator_net(packing: Packing, k: int, partition: CompiledNet | None = None) -> CompiledNet:
    """Network for the indicator of retracted cell k (exact off the trifling region)."""
    if not 0 <= k < packing.K:
        raise ConfigurationError(f"cell index {k} outside 0..{packing.K - 1}")
    net = build_partition_net(packing) if partition is None else partition
    pick = sp.csr_matrix(([1.0], ([0], [k])), shape=(1, packing.K))
    return postcompose_linear(net, pick).with_meta(role="indicator", k=k)


def build_approximator(packing: Packing, f: TargetFunction,
                       partition: CompiledNet | None = None) -> CompiledNet:
    """Network returning sum_k vec(atoms of nu_k) * Phi_k, an M*D output block.

    With a single landmark the result is a constant network.
    """
    values = [f(z) for z in packing.landmarks]
    M, D = values[0].M, values[0].D
    out = np.stack([v.atoms.ravel() for v in values], axis=1)
    z0 = packing.landmarks[0]
    in_dim = z0.context.N * (z0.context.d + 1) + z0.context.d
    meta = dict(role="approximator", M=M, D=D, K=packing.K, target=f.name)
    if packing.K == 1:
        return constant_net(in_dim, out[:, 0]).with_meta(**meta)
    net = build_partition_net(packing) if partition is None else partition
    return postcompose_linear(net, out).with_meta(**meta)


def predicted_measure(f_hat: CompiledNet, p: ContextQuery, M: int, D: int) -> np.ndarray:
    return f_hat(p.flat()).reshape(M, D)


@dataclass
class RegionReport:
    delta: float
    delta_star: float
    K: int
    trifling_fraction: float
    sup_err_approx_region: float
    tail_moment_p: float
    bound_omega_delta: float
    bound_trifling: float
    bound_trifling_without_K: float
    bound_tail: float
    moment_p: float
    q: float

    CSV_COLUMNS = ("delta", "delta_star", "K", "trifling_fraction", "sup_err_approx_region",
                   "tail_moment_p", "bound_omega_delta", "bound_trifling")

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def region_statistics(packing: Packing, samples: Sequence[ContextQuery], f: TargetFunction,
                      f_hat: CompiledNet, p: float = 1.0, q: float = 1.0,
                      partition: CompiledNet | None = None,
                      assignment: CellAssignment | None = None) -> RegionReport:
    """Empirical error statistics against the bound expressions (unit constants).

    On the approximation region the error is W1(f, f_hat) with f_hat read as
    a uniform measure on its M output rows.  On the trifling region the
    output is read as the mixture sum_k Phi_k nu_k, which need not be a
    probability measure, and the error is the KR norm of f minus that
    mixture.  The tail moment is ``(mean over all samples of err^p 1_trifling)^(1/p)``.
    """
    if p < 1:
        raise ConfigurationError("moment order must be at least 1")
    assignment = assign_cells(packing, samples) if assignment is None else assignment
    values = [f(z) for z in packing.landmarks]
    M, D = values[0].M, values[0].D
    omega = f.modulus
    n = len(samples)
    trif = assignment.trifling
    X = np.array([s.flat() for s in samples])
    sup_err = 0.0
    approx = np.flatnonzero(~trif)
    if approx.size:
        pred = f_hat(X[approx]).reshape(-1, M, D)
        for i, atoms in zip(approx, pred):
            sup_err = max(sup_err, w1_uniform_atoms(f(samples[i]).atoms, atoms))
    tail_sum = 0.0
    idx = np.flatnonzero(trif)
    if idx.size:
        if packing.K == 1:
            phi = np.ones((idx.size, 1))
        else:
            net = build_partition_net(packing) if partition is None else partition
            phi = net(X[idx])
        for i, weights in zip(idx, phi):
            target = f(samples[i])
            parts = [(1.0, target.atoms, np.full(M, 1.0 / M))]
            parts += [(-float(w), v.atoms, np.full(M, 1.0 / M)) for w, v in zip(weights, values) if w != 0.0]
            tail_sum += kr_norm(SignedDiscreteMeasure.combine(parts)) ** p
    delta, delta_star = packing.delta, packing.delta_star
    shell = delta ** q - delta_star ** q
    return RegionReport(
        delta=float(delta),
        delta_star=float(delta_star),
        K=packing.K,
        trifling_fraction=float(trif.mean()) if n else 0.0,
        sup_err_approx_region=float(sup_err),
        tail_moment_p=float((tail_sum / n) ** (1.0 / p)) if n else 0.0,
        bound_omega_delta=omega(delta),
        bound_trifling=float(packing.K * shell),
        bound_trifling_without_K=float(shell),
        bound_tail=float((omega(delta) + 1.0) * shell ** (1.0 / p)),
        moment_p=float(p),
        q=float(q),
    )
