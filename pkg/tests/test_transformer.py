import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from picnet.errors import ConfigurationError
from picnet.netbuilder import CompiledNet, Layer, build_abs, build_l1_norm, identity_net, linear_net
from picnet.netbuilder.core import IDENTITY, RELU, act_array
from picnet.transformer import (
    AttentionHead,
    TransformerBlock,
    TransformerNet,
    attention_eval,
    build_matmul_heads,
    transformer_eval,
    transformerify,
)
from picnet.w1net import build_w1_contextual, build_w1_uniform

from conftest import gadget_zoo


def heads_output(heads, Z):
    block = TransformerBlock(tuple(heads), np.zeros(Z.shape), act_array(IDENTITY, Z.size))
    return block(Z[None])[0]


# -- attention --------------------------------------------------------------------

def test_zero_scores_give_weights(rng):
    t = 3
    head = AttentionHead(sp.csr_matrix((t, t)), sp.csr_matrix((t, t)), sp.identity(4 * t))
    X = rng.normal(size=(4, t))
    w = np.array([0.1, 0.2, 0.3, 0.4])
    atoms, masses = attention_eval(head, X[0], X, w)
    assert np.allclose(masses, w, atol=1e-15)
    assert np.array_equal(atoms, X)
    _, uniform = attention_eval(head, X[0], X)
    assert np.allclose(uniform, 0.25, atol=1e-15)


def test_single_token(rng):
    V = rng.normal(size=(2, 3))
    head = AttentionHead(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), V)
    x = rng.normal(size=3)
    atoms, masses = attention_eval(head, x, x[None])
    assert masses.tolist() == [1.0]
    assert np.allclose(atoms[0], V @ x, atol=1e-15)


def test_large_temperature_concentrates(rng):
    t = 2
    Q = np.eye(t)
    X = np.array([[0.1, 0.0], [0.9, 0.0], [0.5, 0.0]])
    head = AttentionHead(Q, np.eye(t), sp.identity(3 * t), lam=1e3)
    _, masses = attention_eval(head, np.array([1.0, 0.0]), X)
    assert masses[1] == pytest.approx(1.0, abs=1e-6)
    # direct softmax
    s = 1e3 * X[:, 0] / np.sqrt(t)
    ref = np.exp(s - s.max()) / np.exp(s - s.max()).sum()
    assert np.allclose(masses, ref, atol=1e-15)


@pytest.mark.parametrize("lam", [0.1, 1.0, 100.0])
def test_zero_qk_temperature_invariant(lam, rng):
    B = rng.normal(size=(6, 6))
    X = rng.normal(size=(3, 2))
    out = heads_output(build_matmul_heads(B, 3, lam), X)
    ref = heads_output(build_matmul_heads(B, 3, 1.0), X)
    assert np.array_equal(out, ref)


def test_mass_conservation(rng):
    for _ in range(50):
        n, t = rng.integers(1, 6), rng.integers(1, 4)
        head = AttentionHead(rng.normal(size=(t, t)), rng.normal(size=(t, t)), sp.identity(n * t), lam=rng.uniform(0.1, 10))
        w = rng.uniform(0.1, 1, size=n)
        w /= w.sum()
        _, masses = attention_eval(head, rng.normal(size=t), rng.normal(size=(n, t)), w)
        assert abs(masses.sum() - 1.0) <= 1e-12


def test_attention_validation():
    z = sp.csr_matrix((2, 2))
    with pytest.raises(ConfigurationError):
        AttentionHead(z, sp.csr_matrix((3, 2)), sp.identity(4))
    with pytest.raises(ConfigurationError):
        AttentionHead(z, z, sp.identity(4), lam=0.0)
    with pytest.raises(ConfigurationError):
        AttentionHead(z, z, sp.csr_matrix((4, 5)))
    head = AttentionHead(z, z, sp.identity(4))
    with pytest.raises(ConfigurationError):
        attention_eval(head, np.zeros(2), np.zeros((3, 2)))


# -- matmul heads -------------------------------------------------------------------

def test_matmul_identity_and_zero(rng):
    X = rng.normal(size=(3, 4))
    # the N * (1/N) round trip costs at most an ulp or two when N is not a power of two
    assert np.allclose(heads_output(build_matmul_heads(sp.identity(12), 3), X), X, rtol=1e-15, atol=0)
    Y = rng.normal(size=(2, 4))
    assert np.array_equal(heads_output(build_matmul_heads(sp.identity(8), 2), Y), Y)
    assert np.array_equal(heads_output(build_matmul_heads(sp.csr_matrix((12, 12)), 3), X), np.zeros((3, 4)))


def test_matmul_random(rng):
    for t_out in (4, 2, 5):
        B = rng.normal(size=(3 * t_out, 12))
        X = rng.normal(size=(3, 4))
        out = heads_output(build_matmul_heads(B, 3), X)
        assert np.max(np.abs(out.ravel() - B @ X.ravel())) <= 1e-12


def test_matmul_shape_check():
    with pytest.raises(ConfigurationError):
        build_matmul_heads(np.ones((5, 6)), 3)


# -- conversion ---------------------------------------------------------------------

def test_identity_net_conversion(rng):
    x = rng.normal(size=(20, 6))
    assert np.allclose(transformerify(identity_net(6), 3)(x), x, rtol=1e-15, atol=0)
    assert np.array_equal(transformerify(identity_net(6), 2)(x), x)


@pytest.mark.parametrize("name,net,N", gadget_zoo(), ids=[g[0] for g in gadget_zoo()])
def test_gadget_conversion_exact(name, net, N, rng):
    tf = transformerify(net, N, pad_input=True)
    x = rng.uniform(-1, 1, size=(10_000, net.input_dim))
    assert np.max(np.abs(tf(x) - net(x))) <= 1e-9
    assert all(len(b.heads) == N for b in tf.blocks)
    assert tf.nonzero_param_count <= 2 * net.nonzero_param_count
    assert tf.depth == net.depth and tf.width == net.width
    assert tf.padded_width >= tf.width


def test_nnz_equal_without_padding(rng):
    net = build_l1_norm(4)
    tf = transformerify(net, 1)
    assert tf.nonzero_param_count == net.nonzero_param_count


def test_w1_net_conversion(rng):
    for net, N in [(build_w1_uniform(2, 2), 2), (build_w1_contextual(2, 2, 1), 2)]:
        tf = transformerify(net, N)
        x = rng.uniform(0, 1, size=(2000, net.input_dim))
        assert np.max(np.abs(tf(x) - net(x))) <= 1e-9
        assert tf.max_heads == N


def test_input_split_rules():
    with pytest.raises(ConfigurationError):
        transformerify(build_l1_norm(3), 2)
    tf = transformerify(build_l1_norm(3), 2, pad_input=True)
    assert tf.input_dim == 3
    assert tf(np.array([1.0, -2.0, 0.5]))[0] == 3.5
    with pytest.raises(ConfigurationError):
        transformerify(build_abs(), 0)


def test_hand_computed_single_block():
    # x -> 2 * relu(x + 1) - relu(x2 + 1) with zero input: 2 - 1 = 1
    layer = Layer(sp.csr_matrix([[2.0, -1.0]]), np.array([1.0, 1.0]), act_array(RELU, 2))
    net = CompiledNet((layer,))
    tf = transformerify(net, 1)
    assert tf(np.zeros(2))[0] == 1.0
    assert net(np.zeros(2))[0] == 1.0


def test_single_token_head_formula(rng):
    W = rng.normal(size=(3, 3))
    tf = transformerify(linear_net(W), 1)
    x = rng.normal(size=3)
    head = tf.blocks[0].heads[0]
    atoms, masses = attention_eval(head, x, x[None])
    assert np.allclose(tf(x), masses[0] * atoms[0], atol=1e-15)


def test_json_round_trip(rng):
    net = build_w1_uniform(2, 1)
    tf = transformerify(net, 2)
    back = TransformerNet.from_json(tf.dumps())
    x = rng.uniform(size=(50, 4))
    assert np.array_equal(back(x), tf(x))
    assert back.sizes() == tf.sizes()
    obj = tf.to_json()
    obj["meta"]["nnz"] += 1
    with pytest.raises(ConfigurationError):
        TransformerNet.from_json(obj)


def test_eval_rejects_bad_input():
    tf = transformerify(build_abs(), 1)
    with pytest.raises(ConfigurationError):
        transformer_eval(tf, np.zeros(3))


def test_approximator_conversion():
    from picnet.harness.samples import make_rng
    from picnet.harness.targets import target_library
    from picnet.measures import enumerate_weights, ContextQuery, PICMeasure
    from picnet.partition import build_approximator, greedy_packing

    rng = make_rng(3)
    ws = enumerate_weights(2, 2)
    samples = [ContextQuery(PICMeasure(rng.uniform(0, 0.5, (2, 1)), ws[rng.integers(len(ws))]),
                            rng.uniform(0, 0.5, 1)) for _ in range(60)]
    pk = greedy_packing(samples, 0.3)
    f_hat = build_approximator(pk, target_library("mean_shift", 2, 1))
    # input dimension N(d+1)+d = 5 is not a multiple of N = 2
    tf = transformerify(f_hat, 2, pad_input=True)
    X = np.array([s.flat() for s in samples])
    assert np.max(np.abs(tf(X) - f_hat(X))) <= 1e-9
    assert all(len(b.heads) == 2 for b in tf.blocks)
    assert tf.nonzero_param_count <= 2 * f_hat.nonzero_param_count
