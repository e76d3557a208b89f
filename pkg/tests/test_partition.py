import itertools

import numpy as np
import pytest

from picnet.errors import ConfigurationError
from picnet.harness.targets import target_library
from picnet.measures import ContextQuery, OutputMeasure, PICMeasure, enumerate_weights, pair_metric, w1_uniform_atoms
from picnet.partition import (
    TRIFLING,
    ModulusOfContinuity,
    Packing,
    TargetFunction,
    assign_cells,
    build_approximator,
    build_indicator_net,
    build_partition_net,
    greedy_packing,
    landmark_distances,
    pwc_approximator,
    region_statistics,
)


def point(x, query, d=1):
    return ContextQuery(PICMeasure.uniform(np.full((1, d), x, dtype=float)), np.full(d, query, dtype=float))


def clustered_samples(rng, n, C=2, N=2, d=2, spread=0.4):
    weights = enumerate_weights(C, N)
    return [ContextQuery(PICMeasure(rng.uniform(0, spread, (N, d)), weights[rng.integers(len(weights))]),
                         rng.uniform(0, spread, d)) for _ in range(n)]


@pytest.fixture(scope="module")
def cloud():
    from picnet.harness.samples import make_rng
    return clustered_samples(make_rng(7), 120)


def brute_distances(samples):
    n = len(samples)
    return np.array([[pair_metric(samples[i], samples[j]) for j in range(n)] for i in range(n)])


# -- packing ------------------------------------------------------------------

def test_single_sample_packing():
    assert greedy_packing([point(0.0, 0.0)], 0.5).K == 1


def test_two_far_samples():
    # pair metric 1 + 2 = 3
    pk = greedy_packing([point(0.0, 0.0), point(1.0, 2.0)], 1.0)
    assert pk.K == 2 and pk.indices == (0, 1)


def test_grid_packing_is_net():
    grid = [ContextQuery(PICMeasure.uniform(np.zeros((1, 1))), np.array([0.1 * i])) for i in range(100)]
    pk = greedy_packing(grid, 0.35)
    D = brute_distances(grid)
    sel = list(pk.indices)
    off = D[np.ix_(sel, sel)][~np.eye(pk.K, dtype=bool)]
    assert off.min() >= 0.35
    assert D[:, sel].min(axis=1).max() < 0.35


def test_packing_validation():
    a, b = point(0.0, 0.0), point(0.1, 0.0)
    with pytest.raises(ConfigurationError):
        Packing((a, b), 0.5, 0.2)
    with pytest.raises(ConfigurationError):
        Packing((a,), 0.5, 0.5)
    with pytest.raises(ConfigurationError):
        greedy_packing([], 0.5)
    with pytest.raises(ConfigurationError):
        greedy_packing([a], 0.0)


def test_packing_distances_argument(cloud):
    D = brute_distances(cloud)
    p1 = greedy_packing(cloud, 0.5, 0.25)
    p2 = greedy_packing(cloud, 0.5, 0.25, distances=D)
    assert p1.indices == p2.indices
    assert np.allclose(p1.distances, p2.distances)


# -- cells --------------------------------------------------------------------

def test_landmark_in_own_cell(cloud):
    pk = greedy_packing(cloud, 0.5, 0.25)
    labels = assign_cells(pk, list(pk.landmarks)).labels
    assert list(labels) == list(range(pk.K))


def test_annulus_point_is_trifling():
    pk = Packing((point(0.0, 0.0),), 1.0, 0.5)
    # distance 0.75 from the only landmark
    assert assign_cells(pk, [point(0.0, 0.75)]).labels[0] == TRIFLING
    assert assign_cells(pk, [point(0.0, 0.3)]).labels[0] == 0
    # outside every ball
    assert assign_cells(pk, [point(0.0, 5.0)]).labels[0] == TRIFLING


def test_cell_literal_definition(cloud):
    pk = greedy_packing(cloud, 0.45, 0.2)
    asg = assign_cells(pk, cloud)
    dist = landmark_distances(pk, cloud)
    for i, k in enumerate(asg.labels):
        if k == TRIFLING:
            continue
        assert dist[i, k] < pk.delta_star
        assert np.all(dist[i, :k] >= pk.delta)


@pytest.mark.parametrize("delta,ratio", [(0.3, 0.5), (0.5, 0.3), (0.5, 0.8)])
def test_cells_separated_and_disjoint(cloud, delta, ratio):
    pk = greedy_packing(cloud, delta, delta * ratio)
    asg = assign_cells(pk, cloud)
    D = brute_distances(cloud)
    lab = asg.labels
    for i, j in itertools.combinations(range(len(cloud)), 2):
        if lab[i] != TRIFLING and lab[j] != TRIFLING and lab[i] != lab[j]:
            assert D[i, j] >= pk.delta - pk.delta_star - 1e-9
    m = asg.membership(pk.K)
    assert np.all(m.sum(axis=1) == (~asg.trifling).astype(float))


def test_cells_grow_with_delta_star(cloud):
    base = greedy_packing(cloud, 0.5)
    prev = None
    fractions = []
    for ds in (0.05, 0.15, 0.25, 0.35, 0.45, 0.49):
        asg = assign_cells(base.with_delta_star(ds), cloud)
        fractions.append(asg.trifling.mean())
        if prev is not None:
            kept = prev != TRIFLING
            assert np.all(asg.labels[kept] == prev[kept])
        prev = asg.labels
    # annulus points leave the trifling set as delta_star grows
    assert all(a >= b for a, b in zip(fractions, fractions[1:]))


# -- piecewise constant approximator -------------------------------------------

def test_pwc_at_landmarks_and_bound(cloud):
    f = target_library("mean_shift", 2, 1)
    pk = greedy_packing(cloud, 0.2)
    values, ev = pwc_approximator(pk, f)
    for z, v in zip(pk.landmarks, values):
        assert np.array_equal(ev(z).atoms, v.atoms)
    err = max(w1_uniform_atoms(f(p).atoms, ev(p).atoms) for p in cloud)
    assert err <= f.modulus(0.2)


def test_pwc_constant_target(cloud):
    const = TargetFunction(lambda p: OutputMeasure(np.array([[1.0], [2.0]])), 0.0)
    pk = greedy_packing(cloud, 0.3)
    _, ev = pwc_approximator(pk, const)
    assert all(np.array_equal(ev(p).atoms, [[1.0], [2.0]]) for p in cloud)


# -- compiled indicators ------------------------------------------------------

@pytest.fixture(scope="module")
def compiled(cloud):
    pk = greedy_packing(cloud, 0.5, 0.25)
    return pk, build_partition_net(pk)


def test_partition_net_matches_membership(cloud, compiled):
    pk, net = compiled
    assert pk.K >= 5
    asg = assign_cells(pk, cloud)
    X = np.array([s.flat() for s in cloud])
    phi = net(X)
    inside = ~asg.trifling
    assert np.max(np.abs(phi[inside] - asg.membership(pk.K)[inside])) <= 1e-9
    assert np.all(phi >= -1e-12) and np.all(phi.sum(axis=1) <= 1 + 1e-9)


def test_indicator_net_landmarks(compiled):
    pk, net = compiled
    X = np.array([z.flat() for z in pk.landmarks])
    for k in (0, pk.K // 2, pk.K - 1):
        ind = build_indicator_net(pk, k, net)(X)[:, 0]
        expect = np.zeros(pk.K)
        expect[k] = 1.0
        assert np.array_equal(ind, expect)
    with pytest.raises(ConfigurationError):
        build_indicator_net(pk, pk.K, net)


def test_partition_net_size(compiled):
    pk, net = compiled
    from picnet.w1net import build_w1_contextual
    w1 = build_w1_contextual(2, 2, 2)
    assert net.depth == w1.depth + 2 + pk.K
    assert net.width <= pk.K * (w1.width + 2 + 1) + 4
    assert net.meta["role"] == "partition"


def test_approximator_at_landmarks(compiled):
    pk, net = compiled
    f = target_library("barycentric", 2, 2, C=2)
    f_hat = build_approximator(pk, f, net)
    for z in pk.landmarks:
        assert np.array_equal(f_hat(z.flat()).reshape(2, 2), f(z).atoms)


def test_single_landmark_constant_net():
    pk = greedy_packing([point(0.3, 0.1)], 1.0)
    f = target_library("mean_shift", 3, 1)
    f_hat = build_approximator(pk, f)
    assert f_hat.depth == 1 and f_hat.meta["K"] == 1
    x = np.random.default_rng(0).uniform(size=(5, 3))
    assert np.all(f_hat(x) == 0.4)


def test_pipeline_error_within_modulus():
    from picnet.harness.samples import make_rng
    samples = clustered_samples(make_rng(11), 150)
    f = target_library("mean_shift", 2, 1)
    pk = greedy_packing(samples, 0.3, 0.15)
    net = build_partition_net(pk) if pk.K > 1 else None
    f_hat = build_approximator(pk, f, net)
    rep = region_statistics(pk, samples, f, f_hat, partition=net)
    assert pk.K > 1 and rep.trifling_fraction < 1
    assert rep.sup_err_approx_region <= 0.3
    asg = assign_cells(pk, samples)
    X = np.array([s.flat() for s in samples])
    pred = f_hat(X).reshape(-1, 2, 1)
    err = max(w1_uniform_atoms(f(samples[i]).atoms, pred[i]) for i in np.flatnonzero(~asg.trifling))
    assert err == pytest.approx(rep.sup_err_approx_region, abs=1e-12)


def test_region_statistics_constant_target(cloud, compiled):
    pk, net = compiled
    const = TargetFunction(lambda p: OutputMeasure(np.array([[0.5]])), 0.0, "const")
    f_hat = build_approximator(pk, const, net)
    rep = region_statistics(pk, cloud, const, f_hat, partition=net)
    assert rep.sup_err_approx_region == 0.0
    # on the trifling region the mixture keeps only part of the mass unless the gates sum to 1
    assert rep.bound_omega_delta == 0.0
    assert rep.K == pk.K


def test_region_statistics_monotone_in_delta_star(cloud):
    f = target_library("mean_shift", 1, 1)
    base = greedy_packing(cloud, 0.5)
    fr = []
    for ds in (0.1, 0.25, 0.4):
        pk = base.with_delta_star(ds)
        f_hat = build_approximator(pk, f)
        fr.append(region_statistics(pk, cloud, f, f_hat).trifling_fraction)
    assert fr[0] >= fr[1] >= fr[2]


def test_region_statistics_bounds(cloud, compiled):
    pk, net = compiled
    f = target_library("mean_shift", 1, 1)
    rep = region_statistics(pk, cloud, f, build_approximator(pk, f, net), p=2, q=2, partition=net)
    shell = 0.5 ** 2 - 0.25 ** 2
    assert rep.bound_trifling == pytest.approx(pk.K * shell)
    assert rep.bound_tail == pytest.approx((0.5 + 1) * shell ** 0.5)
    assert rep.moment_p == 2.0
    with pytest.raises(ConfigurationError):
        region_statistics(pk, cloud, f, build_approximator(pk, f, net), p=0.5)


# -- modulus and targets -------------------------------------------------------

def test_modulus_validation():
    om = ModulusOfContinuity.linear(2.0)
    assert om(0.5) == 1.0 and om.inverse(1.0) == 0.5
    assert ModulusOfContinuity.linear(0.0).inverse(1.0) == np.inf
    with pytest.raises(ConfigurationError):
        ModulusOfContinuity(lambda t: 1.0 + t)
    with pytest.raises(ConfigurationError):
        ModulusOfContinuity(lambda t: -t)
    with pytest.raises(ConfigurationError):
        ModulusOfContinuity.linear(-1.0)
    sqrt = ModulusOfContinuity(np.sqrt, lambda e: e * e)
    assert sqrt(4.0) == 2.0 and sqrt.inverse(3.0) == 9.0


def test_custom_modulus_used_for_bound(cloud):
    f = TargetFunction(lambda p: OutputMeasure(p.query[None, :1]), 1.0, omega=ModulusOfContinuity(np.sqrt))
    pk = greedy_packing(cloud, 0.5)
    rep = region_statistics(pk, cloud, f, build_approximator(pk, f))
    assert rep.bound_omega_delta == pytest.approx(np.sqrt(0.5))
