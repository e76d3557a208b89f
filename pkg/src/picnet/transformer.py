"""Multi-head attention and the conversion of layered networks into transformers.

A token matrix ``Z`` has shape ``(N, t)``; flat vectors map to tokens row by
row.  A value matrix acts on the whole token matrix: ``V`` has shape
``(N * t_out, N * t)`` and ``(V Z)_n`` is row ``n`` of ``(V @ Z.ravel()).reshape(N, t_out)``.
Head ``h`` of a block reads its query from token ``h`` and returns
``sum_n a_n (V Z)_n`` with attention masses::

    a_n = w_n exp(s_n) / sum_m w_m exp(s_m),   s_n = lam * <Q x, K Z_n> / sqrt(t)

The heads' outputs are stacked as the rows of the next token matrix.

A layer ``x -> A sigma(x + b)`` becomes a block whose bias and activations
act entrywise on the tokens and whose N heads have ``Q = K = 0`` and
``V_h = N E_h A``, where ``E_h`` keeps only output token ``h``.  With zero
scores every mass is ``1/N``, so head ``h`` returns token ``h`` of ``A z``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from picnet.errors import ConfigurationError
from picnet.netbuilder.core import IDENTITY, CompiledNet, _apply_act, act_array


def _sparse_to_json(m: sp.spmatrix) -> dict:
    coo = sp.coo_matrix(m)
    order = np.lexsort((coo.col, coo.row))
    return {"shape": list(coo.shape), "row": coo.row[order].tolist(),
            "col": coo.col[order].tolist(), "val": coo.data[order].tolist()}


def _sparse_from_json(obj) -> sp.csr_matrix:
    return sp.csr_matrix((obj["val"], (obj["row"], obj["col"])), shape=tuple(obj["shape"]))


@dataclass(frozen=True, eq=False)
class AttentionHead:
    Q: sp.csr_matrix
    K: sp.csr_matrix
    V: sp.csr_matrix
    lam: float = 1.0

    def __post_init__(self):
        Q, K, V = (sp.csr_matrix(m, dtype=float) for m in (self.Q, self.K, self.V))
        for m in (Q, K, V):
            m.eliminate_zeros()
        if Q.shape != K.shape:
            raise ConfigurationError(f"query {Q.shape} and key {K.shape} shapes differ")
        if not self.lam > 0:
            raise ConfigurationError("temperature must be positive")
        if V.shape[1] % Q.shape[1]:
            raise ConfigurationError("value input is not a whole number of tokens")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "V", V)

    @property
    def token_dim(self) -> int:
        return self.Q.shape[1]

    @property
    def n_tokens(self) -> int:
        return self.V.shape[1] // self.token_dim

    @property
    def out_dim(self) -> int:
        return self.V.shape[0] // self.n_tokens

    def nonzero_param_count(self) -> int:
        return self.Q.count_nonzero() + self.K.count_nonzero() + self.V.count_nonzero()

    def to_json(self) -> dict:
        return {"Q": _sparse_to_json(self.Q), "K": _sparse_to_json(self.K),
                "V": _sparse_to_json(self.V), "lambda": float(self.lam)}

    @classmethod
    def from_json(cls, obj) -> "AttentionHead":
        return cls(_sparse_from_json(obj["Q"]), _sparse_from_json(obj["K"]),
                   _sparse_from_json(obj["V"]), obj["lambda"])


def _check_tokens(head: AttentionHead, X: np.ndarray) -> None:
    if X.shape[-2:] != (head.n_tokens, head.token_dim):
        raise ConfigurationError(
            f"token matrix {X.shape[-2:]} does not fit head ({head.n_tokens}, {head.token_dim})")


def _masses(head: AttentionHead, x: np.ndarray, X: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Attention masses for batched queries ``x`` (B, t) and tokens ``X`` (B, N, t)."""
    if head.Q.count_nonzero() == 0 or head.K.count_nonzero() == 0:
        scores = np.zeros(X.shape[:2])
    else:
        q = np.asarray(head.Q.dot(x.T).T)
        k = np.asarray(head.K.dot(X.reshape(-1, X.shape[-1]).T).T).reshape(X.shape[0], X.shape[1], -1)
        scores = head.lam * np.einsum("br,bnr->bn", q, k) / math.sqrt(head.token_dim)
    scores = scores - scores.max(axis=1, keepdims=True)
    unnorm = w * np.exp(scores)
    return unnorm / unnorm.sum(axis=1, keepdims=True)


def _values(head: AttentionHead, X: np.ndarray) -> np.ndarray:
    flat = X.reshape(X.shape[0], -1)
    return np.asarray(head.V.dot(flat.T).T).reshape(X.shape[0], head.n_tokens, head.out_dim)


def attention_eval(head: AttentionHead, x, X, w=None) -> tuple[np.ndarray, np.ndarray]:
    """Weighted atoms ``((V X)_n, a_n)`` of one head for query ``x`` and tokens ``X``.

    ``w`` are the token weights (uniform when omitted).  The masses sum to 1
    whenever the weights are positive.
    """
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    _check_tokens(head, X)
    n = X.shape[0]
    w = np.full(n, 1.0 / n) if w is None else np.asarray(w, dtype=float).ravel()
    if w.shape[0] != n or x.shape[0] != head.token_dim:
        raise ConfigurationError("query or weights do not match the token matrix")
    masses = _masses(head, x[None, :], X[None], w[None, :])[0]
    return _values(head, X[None])[0], masses


@dataclass(frozen=True, eq=False)
class TransformerBlock:
    """Entrywise activation and bias on (N, t) tokens followed by multi-head attention."""

    heads: tuple[AttentionHead, ...]
    bias: np.ndarray
    act: np.ndarray

    def __post_init__(self):
        heads = tuple(self.heads)
        bias = np.array(self.bias, dtype=float)
        if bias.ndim != 2:
            raise ConfigurationError("block bias must be a token matrix")
        act = act_array(self.act).reshape(bias.shape + (3,))
        if not heads:
            raise ConfigurationError("a block needs at least one head")
        for head in heads:
            _check_tokens(head, bias)
        if len({h.out_dim for h in heads}) != 1:
            raise ConfigurationError("heads disagree in output width")
        bias.setflags(write=False)
        act.setflags(write=False)
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "act", act)

    @property
    def n_tokens(self) -> int:
        return self.bias.shape[0]

    @property
    def token_dim(self) -> int:
        return self.bias.shape[1]

    @property
    def out_shape(self) -> tuple[int, int]:
        return (len(self.heads), self.heads[0].out_dim)

    def nonzero_param_count(self) -> int:
        return int(np.count_nonzero(self.bias) + sum(h.nonzero_param_count() for h in self.heads))

    def __call__(self, X: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
        """Apply to a batch of token matrices (B, N, t); returns (B, H, t_out)."""
        Z = _entrywise(X + self.bias, self.act)
        n = self.n_tokens
        w = np.full((Z.shape[0], n), 1.0 / n) if w is None else w
        outs = []
        for h, head in enumerate(self.heads):
            masses = _masses(head, Z[:, h % n], Z, w)
            outs.append(np.einsum("bn,bnt->bt", masses, _values(head, Z)))
        return np.stack(outs, axis=1)

    def to_json(self) -> dict:
        return {"heads": [h.to_json() for h in self.heads], "bias": self.bias.tolist(),
                "act": self.act.reshape(-1, 3).tolist()}

    @classmethod
    def from_json(cls, obj) -> "TransformerBlock":
        bias = np.array(obj["bias"], dtype=float)
        return cls(tuple(AttentionHead.from_json(h) for h in obj["heads"]), bias, obj["act"])


def _entrywise(X: np.ndarray, act: np.ndarray) -> np.ndarray:
    flat = X.reshape(X.shape[0], -1)
    return _apply_act(flat, act.reshape(-1, 3)).reshape(X.shape)


@dataclass(frozen=True, eq=False)
class TransformerNet:
    blocks: tuple[TransformerBlock, ...]
    input_dim: int
    output_dim: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ConfigurationError("a transformer needs at least one block")
        for prev, nxt in zip(blocks, blocks[1:]):
            if prev.out_shape != (nxt.n_tokens, nxt.token_dim):
                raise ConfigurationError(f"block output {prev.out_shape} does not feed "
                                         f"{(nxt.n_tokens, nxt.token_dim)}")
        n, t = blocks[0].n_tokens, blocks[0].token_dim
        if self.input_dim > n * t or self.output_dim > int(np.prod(blocks[-1].out_shape)):
            raise ConfigurationError("logical dimensions exceed the token shapes")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_tokens(self) -> int:
        return self.blocks[0].n_tokens

    @property
    def depth(self) -> int:
        return len(self.blocks) - 1

    @property
    def padded_width(self) -> int:
        return max((int(np.prod(b.out_shape)) for b in self.blocks[:-1]), default=0)

    @property
    def width(self) -> int:
        """Largest intermediate dimension before token padding (recorded at conversion)."""
        return int(self.meta.get("width", self.padded_width))

    @property
    def max_heads(self) -> int:
        return max(len(b.heads) for b in self.blocks)

    @property
    def nonzero_param_count(self) -> int:
        return int(sum(b.nonzero_param_count() for b in self.blocks))

    def sizes(self) -> dict:
        return {"depth": self.depth, "width": self.width, "padded_width": self.padded_width,
                "max_heads": self.max_heads, "nnz": self.nonzero_param_count}

    def __call__(self, x) -> np.ndarray:
        return transformer_eval(self, x)

    def to_json(self) -> dict:
        meta = {**self.meta, **self.sizes()}
        return {"tokens": self.n_tokens, "input_dim": self.input_dim, "output_dim": self.output_dim,
                "blocks": [b.to_json() for b in self.blocks], "meta": meta}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj) -> "TransformerNet":
        if isinstance(obj, str):
            obj = json.loads(obj)
        blocks = tuple(TransformerBlock.from_json(b) for b in obj["blocks"])
        meta = {k: v for k, v in obj.get("meta", {}).items()
                if k not in ("depth", "padded_width", "max_heads", "nnz")}
        net = cls(blocks, obj["input_dim"], obj["output_dim"], meta)
        recorded = obj.get("meta", {})
        for key, value in net.sizes().items():
            if key in recorded and recorded[key] != value:
                raise ConfigurationError(f"recorded {key}={recorded[key]} but recount gives {value}")
        return net


def transformer_eval(t: TransformerNet, x) -> np.ndarray:
    """Evaluate on a flat input (or a batch of rows); returns the flat output."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    n, tok = t.blocks[0].n_tokens, t.blocks[0].token_dim
    if X.ndim != 2 or X.shape[1] not in (t.input_dim, n * tok):
        raise ConfigurationError(f"expected input dimension {t.input_dim}, got {x.shape}")
    if X.shape[1] < n * tok:
        X = np.pad(X, ((0, 0), (0, n * tok - X.shape[1])))
    Z = X.reshape(X.shape[0], n, tok)
    for block in t.blocks:
        Z = block(Z)
    out = Z.reshape(Z.shape[0], -1)[:, :t.output_dim]
    return out[0] if single else out


def build_matmul_heads(B, N: int, lam: float = 1.0) -> list[AttentionHead]:
    """N zero-score heads whose stacked outputs equal ``B z`` as N output tokens.

    ``B`` has shape ``(N * t_out, N * t_in)``; head ``h`` carries ``V_h = N E_h B``
    where ``E_h`` keeps output token ``h``, so only that row block is stored.
    """
    B = sp.csr_matrix(B, dtype=float)
    if B.shape[0] % N or B.shape[1] % N:
        raise ConfigurationError(f"matrix {B.shape} is not a whole number of {N} tokens")
    t_out, t_in = B.shape[0] // N, B.shape[1] // N
    zeros = sp.csr_matrix((t_in, t_in))
    heads = []
    for h in range(N):
        keep = sp.diags(np.repeat(np.arange(N) == h, t_out).astype(float), format="csr")
        heads.append(AttentionHead(zeros, zeros, N * (keep @ B), lam))
    return heads


def _pad_to(n: int, N: int) -> int:
    return -(-n // N) * N


def transformerify(net: CompiledNet, N: int, pad_input: bool = False, lam: float = 1.0) -> TransformerNet:
    """Transformer with N heads per block computing exactly the same map as ``net``.

    Each layer ``A sigma(x + b)`` becomes a block with the same bias and
    activations and the heads of :func:`build_matmul_heads` for ``A``.  Layer
    widths that are not multiples of N are padded with zero neurons; the
    input width must be a multiple of N unless ``pad_input`` is set.
    """
    if N < 1:
        raise ConfigurationError("token count must be positive")
    if net.input_dim % N and not pad_input:
        raise ConfigurationError(f"input dimension {net.input_dim} does not split into {N} tokens")
    blocks = []
    for layer in net.layers:
        d_in, d_out = layer.in_dim, layer.out_dim
        p_in, p_out = _pad_to(d_in, N), _pad_to(d_out, N)
        A = sp.csr_matrix(layer.weight)
        A.resize((p_out, p_in))
        bias = np.pad(layer.bias, (0, p_in - d_in)).reshape(N, p_in // N)
        act = np.vstack([layer.act, act_array(IDENTITY, p_in - d_in)]) if p_in > d_in else layer.act
        blocks.append(TransformerBlock(tuple(build_matmul_heads(A, N, lam)), bias, act))
    meta = {k: v for k, v in net.meta.items()}
    meta.update(width=net.width, lam=lam, source_nnz=net.nonzero_param_count)
    return TransformerNet(tuple(blocks), net.input_dim, net.output_dim, meta)
