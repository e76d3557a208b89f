"""
Computing Wasserstein-1 exactly with a ReLU network
===================================================

Two discrete measures with weights on the grid 1/C are compared with the
l1 ground cost.  The compiled network reads both measures as flat vectors
and returns their W1 distance, and it agrees with an assignment solver.
"""

import itertools

import numpy as np

from picnet.harness.samples import make_rng, random_measure
from picnet.measures import ContextWeights, PICMeasure, enumerate_weights, w1_oracle
from picnet.w1net import build_w1_contextual, contextual_input, enumerate_transport_vertices

# %%
# Quantized weights.  With C = 4 and N = 3 atoms, each weight is a positive
# multiple of 1/4, so only three weight vectors exist.
C, N, d = 4, 3, 2
for w in enumerate_weights(C, N):
    print(w.numerators, "/", w.C)

# %%
# Optimal plans live on vertices of the transport polytope.  For two fixed
# weight vectors the vertices are enumerated exactly, in rationals.
w = ContextWeights((2, 1, 1), C)
v = ContextWeights((1, 1, 2), C)
vertices = enumerate_transport_vertices(w, v)
print(f"{len(vertices)} vertices, for example")
print(vertices[0].as_array())

# %%
# The contextual network handles every weight pair at once: each pair gets a
# gate that fires only when the input weights match it.
net = build_w1_contextual(C, N, d)
print("depth", net.depth, "width", net.width, "nonzeros", net.nonzero_param_count)

rng = make_rng(0)
a, b = random_measure(rng, C, N, d), random_measure(rng, C, N, d)
print("network:", net(contextual_input(a, b))[0])
print("oracle: ", w1_oracle(a, b))

# %%
# Reordering atoms does not change the measure, and the network agrees.
outputs = [net(contextual_input(a.permuted(p), b))[0] for p in itertools.permutations(range(N))]
print("spread over the 6 orderings:", np.ptp(outputs))

# %%
# A small sweep over random pairs.
pairs = [(random_measure(rng, C, N, d), random_measure(rng, C, N, d)) for _ in range(300)]
out = net(np.array([contextual_input(p, q) for p, q in pairs]))[:, 0]
ref = np.array([w1_oracle(p, q) for p, q in pairs])
print("max |network - oracle| over 300 pairs:", np.abs(out - ref).max())

# %%
# Out-of-grid weights are outside the contract: PICMeasure refuses them.
try:
    PICMeasure(np.zeros((2, 1)), ContextWeights((1, 2), 4))
except Exception as exc:  # noqa: BLE001
    print(type(exc).__name__, exc)
