"""Randomized verification sweeps shared by the tests and the command line."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from picnet.errors import ConfigurationError
from picnet.harness.samples import make_rng, random_measure
from picnet.measures import ContextWeights, PICMeasure, enumerate_weights, w1_oracle
from picnet.netbuilder import CompiledNet
from picnet.transformer import TransformerNet
from picnet.w1net import contextual_input, uniform_input

W1_TOL = 1e-6
EQUAL_TOL = 1e-9


@dataclass(frozen=True)
class SweepResult:
    trials: int
    max_error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_error <= self.tolerance


def w1_test_pairs(net: CompiledNet, trials: int, seed: int) -> tuple[np.ndarray, list]:
    """Random measure pairs fitting a compiled W1 net, with the matching flat inputs."""
    meta = net.meta
    role = meta.get("role")
    rng = make_rng(seed)
    N, d = meta.get("N"), meta.get("d")
    if role == "w1_uniform":
        def make():
            return PICMeasure.uniform(random_measure(rng, N, N, d).atoms)
        pairs = [(make(), make()) for _ in range(trials)]
        return np.array([uniform_input(a, b) for a, b in pairs]), pairs
    if role == "w1_fixed":
        w = ContextWeights(tuple(meta["w_num"]), meta["C"])
        v = ContextWeights(tuple(meta["v_num"]), meta["C"])
        pairs = [(random_measure(rng, w.C, N, d, [w]), random_measure(rng, v.C, N, d, [v]))
                 for _ in range(trials)]
        return np.array([uniform_input(a, b) for a, b in pairs]), pairs
    if role == "w1_contextual":
        weights = enumerate_weights(meta["C"], N)
        pairs = [(random_measure(rng, meta["C"], N, d, weights), random_measure(rng, meta["C"], N, d, weights))
                 for _ in range(trials)]
        return np.array([contextual_input(a, b) for a, b in pairs]), pairs
    raise ConfigurationError(f"network role {role!r} is not a W1 network")


def verify_w1_net(net: CompiledNet, trials: int = 500, seed: int = 0, threads: int = 1,
                  tolerance: float = W1_TOL) -> SweepResult:
    """Largest |net - w1_oracle| over seeded random measure pairs."""
    X, pairs = w1_test_pairs(net, trials, seed)
    out = net(X)[:, 0]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        ref = np.array(list(pool.map(lambda ab: w1_oracle(*ab), pairs)))
    return SweepResult(trials, float(np.max(np.abs(out - ref), initial=0.0)), tolerance)


def verify_equal(mlp: CompiledNet, tf: TransformerNet, trials: int = 10_000, seed: int = 0,
                 threads: int = 1, tolerance: float = EQUAL_TOL, scale: float = 1.0) -> SweepResult:
    """Largest output difference between a network and its transformer on uniform random inputs."""
    if mlp.input_dim != tf.input_dim or mlp.output_dim != tf.output_dim:
        raise ConfigurationError("network and transformer dimensions differ")
    X = make_rng(seed).uniform(-scale, scale, size=(trials, mlp.input_dim))
    chunks = np.array_split(X, max(1, threads))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        diffs = list(pool.map(lambda c: np.abs(mlp(c) - tf(c)).max(initial=0.0), chunks))
    return SweepResult(trials, float(max(diffs)), tolerance)
