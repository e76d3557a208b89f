"""Exact gadget networks: norms, products, minima and piecewise-linear bumps."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from picnet.errors import ConfigurationError
from picnet.netbuilder.core import (
    IDENTITY,
    RELU,
    REQU,
    CompiledNet,
    Layer,
    act_array,
    compose,
    identity_net,
    linear_net,
    parallelize,
    postcompose_linear,
)


def _two_layer(W0, b1, act1, W1) -> CompiledNet:
    """Depth-1 net ``W1 sigma_act1(W0 x + b1)``."""
    W0 = sp.csr_matrix(W0, dtype=float)
    first = Layer(W0, np.zeros(W0.shape[1]), IDENTITY)
    second = Layer(W1, b1, act1 if not hasattr(act1, "as_tuple") else act_array(act1, W0.shape[0]))
    return CompiledNet((first, second))


def build_abs() -> CompiledNet:
    """|x| = ReLU(x) + ReLU(-x); depth 1, width 2."""
    return _two_layer([[1.0], [-1.0]], np.zeros(2), RELU, [[1.0, 1.0]]).with_meta(role="abs")


def build_l1_norm(F: int) -> CompiledNet:
    """||x||_1 on R^F by deep parallelization of F absolute-value nets.

    The coordinates are processed one per layer, so the depth is exactly F and
    the width is F + 1 (2 when F = 1).
    """
    if F < 1:
        raise ConfigurationError("F must be positive")
    stacked = parallelize([build_abs() for _ in range(F)], deep=True)
    return postcompose_linear(stacked, np.ones((1, F))).with_meta(role="l1_norm", F=F)


def build_sq_l2_norm(F: int) -> CompiledNet:
    """||x||_2^2 = sum ReQU(x_i) + ReQU(-x_i); depth 1, width 2F."""
    if F < 1:
        raise ConfigurationError("F must be positive")
    W0 = np.vstack([np.eye(F), -np.eye(F)])
    return _two_layer(W0, np.zeros(2 * F), REQU, np.ones((1, 2 * F))).with_meta(role="sq_l2_norm", F=F)


def build_mult(m: int) -> CompiledNet:
    """Componentwise product of (x, y) in R^m x R^m by polarization.

    x*y = ((x+y)^2 - x^2 - y^2) / 2 with every square written as
    ReQU(t) + ReQU(-t); depth 1, width 6m.
    """
    if m < 1:
        raise ConfigurationError("m must be positive")
    W0 = np.zeros((6 * m, 2 * m))
    W1 = np.zeros((m, 6 * m))
    for i in range(m):
        r = 6 * i
        xi, yi = i, m + i
        W0[r, [xi, yi]] = 1.0
        W0[r + 1, [xi, yi]] = -1.0
        W0[r + 2, xi] = 1.0
        W0[r + 3, xi] = -1.0
        W0[r + 4, yi] = 1.0
        W0[r + 5, yi] = -1.0
        W1[i, r:r + 6] = [0.5, 0.5, -0.5, -0.5, -0.5, -0.5]
    return _two_layer(W0, np.zeros(6 * m), REQU, W1).with_meta(role="mult", m=m)


def build_inner_product(n: int) -> CompiledNet:
    """<u, v> for inputs (u, v): products then a sum."""
    return postcompose_linear(build_mult(n), np.ones((1, n))).with_meta(role="inner_product", n=n)


def _min2() -> CompiledNet:
    # min(a, b) = (a + b)/2 - |a - b|/2 with one identity and two ReLU neurons
    W0 = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0]])
    act = act_array([IDENTITY, RELU, RELU])
    return _two_layer(W0, np.zeros(3), act, [[0.5, -0.5, -0.5]])


def build_min(K: int) -> CompiledNet:
    """min over K inputs with a left-leaning binary tree of pairwise minima.

    Depth ceil(log2 K), width at most 3 * ceil(K / 2).
    """
    if K < 1:
        raise ConfigurationError("K must be positive")
    net = identity_net(K)
    width = K
    while width > 1:
        pairs, odd = divmod(width, 2)
        level = [_min2() for _ in range(pairs)]
        if odd:
            level.append(identity_net(1))
        net = compose(parallelize(level, deep=False), net)
        width = pairs + odd
    return net.with_meta(role="min", K=K)


def bump_value(t, delta_star: float, delta: float):
    """Closed form of the scalar trapezoid: 1 on |t| <= delta_star, 0 beyond delta."""
    a = np.abs(np.asarray(t, dtype=float))
    ramp = (a - delta) / (delta_star - delta)
    return np.where(a <= delta_star, 1.0, np.where(a > delta, 0.0, ramp))


def build_scalar_bump(delta_star: float, delta: float) -> CompiledNet:
    """Trapezoid phi(t) = (ReLU(delta - |t|) - ReLU(delta_star - |t|)) / (delta - delta_star).

    Depth 2: the first hidden layer forms |t|, the second the two ramps.
    """
    if not 0 < delta_star < delta:
        raise ConfigurationError(f"need 0 < delta_star < delta, got {delta_star}, {delta}")
    scale = 1.0 / (delta - delta_star)
    first = Layer(sp.csr_matrix([[1.0], [-1.0]]), np.zeros(1), IDENTITY)
    second = Layer(sp.csr_matrix([[-1.0, -1.0], [-1.0, -1.0]]), np.zeros(2), RELU)
    third = Layer(sp.csr_matrix([[scale, -scale]]), np.array([delta, delta_star]), RELU)
    return CompiledNet((first, second, third), {"role": "scalar_bump"})


def build_product(d: int) -> CompiledNet:
    """Product of d inputs via a tree of multiplication gadgets."""
    net = identity_net(d)
    width = d
    while width > 1:
        pairs, odd = divmod(width, 2)
        # inputs (a1, b1, a2, b2, ...) regrouped to (a..., b...) for build_mult
        order = [2 * i for i in range(pairs)] + [2 * i + 1 for i in range(pairs)]
        perm = sp.csr_matrix((np.ones(2 * pairs), (np.arange(2 * pairs), order)),
                             shape=(2 * pairs, 2 * pairs))
        mult = compose(build_mult(pairs), linear_net(perm))
        level = [mult] + ([identity_net(1)] if odd else [])
        net = compose(parallelize(level, deep=False), net)
        width = pairs + odd
    return net


def build_bump(delta_star: float, delta: float, d: int = 1) -> CompiledNet:
    """prod_i phi(x_i) on R^d: parallel scalar trapezoids then a product tree."""
    if d < 1:
        raise ConfigurationError("d must be positive")
    scalar = build_scalar_bump(delta_star, delta)
    if d == 1:
        return scalar.with_meta(role="bump", delta_star=delta_star, delta=delta, d=1)
    net = compose(build_product(d), parallelize([scalar] * d, deep=False))
    return net.with_meta(role="bump", delta_star=delta_star, delta=delta, d=d)


def build_threshold(C: int) -> CompiledNet:
    """1 on (-inf, 0], 0 on [1/(2C), inf), linear in between: ReLU(1 - 2Ct) - ReLU(-2Ct)."""
    if C < 1:
        raise ConfigurationError("C must be positive")
    s = 2.0 * C
    return _two_layer([[-s], [-s]], np.array([1.0, 0.0]), RELU, [[1.0, -1.0]]).with_meta(
        role="threshold", C=C)


def threshold_value(t, C: int):
    t = np.asarray(t, dtype=float)
    return np.clip(1.0 - 2.0 * C * t, 0.0, 1.0)
