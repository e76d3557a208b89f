"""Layered networks with the trainable activation and their algebra.

A network is a list of layers, each computing ``x -> A sigma_theta(x + b)``
with one activation configuration ``theta = (alpha1, p, alpha2)`` per input
neuron::

    sigma_theta(t) = alpha1 * t**p   if t >= 0
                     alpha2 * t      if t < 0

The first layer usually carries identity activations, so it acts as the
input affine map; the output is the last layer's matrix product (there is no
separate output bias).  Depth is ``len(layers) - 1`` and width is the largest
intermediate dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from picnet.errors import ConfigurationError

REQU_RANGE = 1e6


@dataclass(frozen=True)
class ActivationParams:
    alpha1: float
    p: float
    alpha2: float

    def __post_init__(self):
        if not self.p > 0:
            raise ConfigurationError(f"activation exponent must be positive, got {self.p}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return _apply_act(t, np.array([[self.alpha1, self.p, self.alpha2]]))

    def as_tuple(self) -> tuple[float, float, float]:
        return (float(self.alpha1), float(self.p), float(self.alpha2))


RELU = ActivationParams(1.0, 1.0, 0.0)
IDENTITY = ActivationParams(1.0, 1.0, 1.0)
REQU = ActivationParams(1.0, 2.0, 0.0)


def _apply_act(z: np.ndarray, act: np.ndarray) -> np.ndarray:
    a1, p, a2 = act[:, 0], act[:, 1], act[:, 2]
    pos = np.maximum(z, 0.0)
    if np.all(p == 1.0):
        powered = pos
    else:
        powered = np.where(p == 1.0, pos, np.where(p == 2.0, pos * pos, np.power(pos, p)))
    return a1 * powered + a2 * np.minimum(z, 0.0)


def act_array(acts, n: int | None = None) -> np.ndarray:
    """Normalise activations to an (n, 3) array of (alpha1, p, alpha2) rows."""
    if isinstance(acts, ActivationParams):
        if n is None:
            raise ConfigurationError("a single activation needs an explicit width")
        return np.tile(np.array(acts.as_tuple()), (n, 1))
    rows = [a.as_tuple() if isinstance(a, ActivationParams) else tuple(a) for a in acts]
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    if np.any(arr[:, 1] <= 0):
        raise ConfigurationError("activation exponent must be positive")
    return arr


def _is_identity(act: np.ndarray) -> bool:
    return bool(np.all(act == np.array(IDENTITY.as_tuple())))


@dataclass(frozen=True, eq=False)
class Layer:
    """``x -> weight @ sigma_act(x + bias)``."""

    weight: sp.csr_matrix
    bias: np.ndarray
    act: np.ndarray

    def __post_init__(self):
        w = sp.csr_matrix(self.weight, dtype=float)
        w.eliminate_zeros()
        b = np.array(self.bias, dtype=float).ravel()
        a = act_array(self.act, w.shape[1]) if isinstance(self.act, ActivationParams) else act_array(self.act)
        if b.shape[0] != w.shape[1] or a.shape[0] != w.shape[1]:
            raise ConfigurationError(
                f"layer shapes disagree: weight {w.shape}, bias {b.shape}, act {a.shape}")
        b.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "act", a)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def identity_act(self) -> bool:
        return _is_identity(self.act)

    def __call__(self, x: np.ndarray, check_range: bool = False) -> np.ndarray:
        z = x + self.bias
        if check_range:
            requ = self.act[:, 1] == 2.0
            if np.any(requ) and np.max(np.abs(z[..., requ]), initial=0.0) > REQU_RANGE:
                raise FloatingPointError("ReQU input outside the checked range")
        h = _apply_act(z, self.act)
        return np.asarray(self.weight.dot(h.T).T)


@dataclass(frozen=True, eq=False)
class CompiledNet:
    layers: tuple[Layer, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ConfigurationError("a network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ConfigurationError(
                    f"layer output {prev.out_dim} does not feed input {nxt.in_dim}")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        return max((layer.out_dim for layer in self.layers[:-1]), default=0)

    @property
    def nonzero_param_count(self) -> int:
        return int(sum(layer.weight.count_nonzero() + np.count_nonzero(layer.bias)
                       for layer in self.layers))

    def sizes(self) -> dict:
        return {"depth": self.depth, "width": self.width, "nnz": self.nonzero_param_count}

    def with_meta(self, **meta) -> "CompiledNet":
        return CompiledNet(self.layers, {**self.meta, **meta})

    def __call__(self, x, check_range: bool = False) -> np.ndarray:
        return eval_net(self, x, check_range=check_range)

    def to_json(self) -> dict:
        return {
            "layers": [
                {
                    "weight": layer.weight.toarray().tolist(),
                    "bias": layer.bias.tolist(),
                    "act": layer.act.tolist(),
                }
                for layer in self.layers
            ],
            "meta": {**self.sizes(), **self.meta},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj) -> "CompiledNet":
        if isinstance(obj, str):
            obj = json.loads(obj)
        layers = [Layer(np.array(L["weight"], dtype=float).reshape(len(L["weight"]), -1)
                        if L["weight"] else np.zeros((0, len(L["bias"]))),
                        L["bias"], L["act"]) for L in obj["layers"]]
        meta = {k: v for k, v in obj.get("meta", {}).items() if k not in ("depth", "width", "nnz")}
        net = cls(tuple(layers), meta)
        recorded = obj.get("meta", {})
        for key, value in net.sizes().items():
            if key in recorded and recorded[key] != value:
                raise ConfigurationError(f"recorded {key}={recorded[key]} but recount gives {value}")
        return net


def eval_net(net: CompiledNet, x, check_range: bool = False) -> np.ndarray:
    """Evaluate on one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ConfigurationError(f"expected input dimension {net.input_dim}, got {x.shape}")
    for layer in net.layers:
        X = layer(X, check_range=check_range)
    return X[0] if single else X


# ---------------------------------------------------------------------------
# building blocks


def linear_net(W) -> CompiledNet:
    """Depth-0 network x -> W x."""
    W = sp.csr_matrix(W, dtype=float)
    return CompiledNet((Layer(W, np.zeros(W.shape[1]), IDENTITY),))


def identity_net(m: int) -> CompiledNet:
    return linear_net(sp.identity(m, format="csr"))


def constant_net(in_dim: int, value) -> CompiledNet:
    """Depth-1 network ignoring its input and returning ``value`` (one ReLU neuron fed by a unit bias)."""
    value = np.asarray(value, dtype=float).reshape(-1, 1)
    first = Layer(sp.csr_matrix((1, in_dim)), np.zeros(in_dim), IDENTITY)
    second = Layer(sp.csr_matrix(value), np.ones(1), RELU)
    return CompiledNet((first, second))


def pad_depth(net: CompiledNet, depth: int) -> CompiledNet:
    """Append identity-configured layers until the net has the requested depth."""
    layers = list(net.layers)
    m = net.output_dim
    while len(layers) - 1 < depth:
        layers.append(Layer(sp.identity(m, format="csr"), np.zeros(m), IDENTITY))
    return CompiledNet(tuple(layers), net.meta)


def _carry(m: int) -> tuple:
    return (sp.identity(m, format="csr"), np.zeros(m), np.tile(IDENTITY.as_tuple(), (m, 1)))


def parallel_width_bound(nets: Sequence[CompiledNet]) -> int:
    """Width allowance for a parallel stack: total input size plus the largest branch width squared."""
    return sum(n.input_dim for n in nets) + max(n.width for n in nets) ** 2


def parallelize(nets: Sequence[CompiledNet], deep: bool | None = None) -> CompiledNet:
    """Single network computing the concatenation of ``nets`` on concatenated inputs.

    ``deep=False`` stacks the branches side by side and pads the shallower
    ones with identity layers.  ``deep=True`` runs them one after another,
    carrying pending inputs and finished outputs through identity neurons, so
    depth is the sum of the branch depths.  The default picks the side-by-side
    stack when its width stays within :func:`parallel_width_bound` and the
    sequential one otherwise.
    """
    nets = list(nets)
    if not nets:
        raise ConfigurationError("parallelize needs at least one network")
    if len(nets) == 1:
        return nets[0]
    if deep is None:
        wide = _stack(nets, deep=False)
        if wide.width <= parallel_width_bound(nets):
            return wide
        return _stack(nets, deep=True)
    return _stack(nets, deep)


def _stack(nets: list[CompiledNet], deep: bool) -> CompiledNet:
    starts = []
    s = 0
    for net in nets:
        starts.append(s if deep else 0)
        if deep:
            s += net.depth
    total = max(st + net.depth for st, net in zip(starts, nets))
    layers = []
    for g in range(total + 1):
        Ws, bs, acts = [], [], []
        for st, net in zip(starts, nets):
            if g < st:
                W, b, a = _carry(net.input_dim)
            elif g <= st + net.depth:
                L = net.layers[g - st]
                W, b, a = L.weight, L.bias, L.act
            else:
                W, b, a = _carry(net.output_dim)
            Ws.append(W)
            bs.append(b)
            acts.append(a)
        layers.append(Layer(sp.block_diag(Ws, format="csr"), np.concatenate(bs), np.vstack(acts)))
    return CompiledNet(tuple(layers))


def compose(outer: CompiledNet, inner: CompiledNet) -> CompiledNet:
    """Network computing ``outer(inner(x))``, merging the affine maps at the seam."""
    if inner.output_dim != outer.input_dim:
        raise ConfigurationError(
            f"inner output {inner.output_dim} does not match outer input {outer.input_dim}")
    head = outer.layers[0]
    last = inner.layers[-1]
    offset = head.weight.dot(head.bias)
    mergeable = head.identity_act and (outer.depth >= 1 or not np.any(offset))
    if not mergeable:
        return CompiledNet(inner.layers + outer.layers)
    merged = Layer(head.weight @ last.weight, last.bias, last.act)
    rest = list(outer.layers[1:])
    if rest and np.any(offset):
        nxt = rest[0]
        rest[0] = Layer(nxt.weight, nxt.bias + offset, nxt.act)
    return CompiledNet(inner.layers[:-1] + (merged,) + tuple(rest))


def precompose_affine(net: CompiledNet, W, c=None) -> CompiledNet:
    """Network computing ``net(W x + c)``."""
    W = sp.csr_matrix(W, dtype=float)
    c = np.zeros(W.shape[0]) if c is None else np.asarray(c, dtype=float).ravel()
    if W.shape[0] != net.input_dim or c.shape[0] != W.shape[0]:
        raise ConfigurationError("affine map does not feed the network input")
    head = net.layers[0]
    if not head.identity_act:
        pre = Layer(W, np.zeros(W.shape[1]), IDENTITY)
        shifted = Layer(head.weight, head.bias + c, head.act)
        return CompiledNet((pre, shifted) + net.layers[1:], net.meta)
    offset = head.weight.dot(head.bias + c)
    merged = Layer(head.weight @ W, np.zeros(W.shape[1]), IDENTITY)
    rest = list(net.layers[1:])
    if not np.any(offset):
        return CompiledNet((merged, *rest), net.meta)
    if rest:
        nxt = rest[0]
        rest[0] = Layer(nxt.weight, nxt.bias + offset, nxt.act)
        return CompiledNet((merged, *rest), net.meta)
    pre = Layer(W, np.zeros(W.shape[1]), IDENTITY)
    shifted = Layer(head.weight, head.bias + c, IDENTITY)
    return CompiledNet((pre, shifted), net.meta)


def postcompose_linear(net: CompiledNet, W) -> CompiledNet:
    """Network computing ``W net(x)``; the product folds into the last layer."""
    W = sp.csr_matrix(W, dtype=float)
    if W.shape[1] != net.output_dim:
        raise ConfigurationError("linear map does not match the network output")
    last = net.layers[-1]
    return CompiledNet(net.layers[:-1] + (Layer(W @ last.weight, last.bias, last.act),), net.meta)


def select_inputs(net: CompiledNet, indices: Sequence[int], in_dim: int) -> CompiledNet:
    """Feed input coordinate ``indices[k]`` (of a length-``in_dim`` vector) to net input ``k``."""
    cols = [int(s) for s in indices]
    S = sp.csr_matrix((np.ones(len(cols)), (np.arange(len(cols)), cols)), shape=(len(cols), in_dim))
    return precompose_affine(net, S)
