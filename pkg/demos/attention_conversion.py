"""
From ReLU networks to transformers
==================================

Every layer x -> A sigma(x + b) becomes an attention block with N heads.
Queries and keys are zero, so the attention is uniform, and head h carries
the rows of N * A that produce output token h.  The converted transformer
computes the same function with at most twice the nonzero parameters.
"""

import numpy as np

from picnet.netbuilder import build_min, build_mult
from picnet.transformer import attention_eval, transformerify
from picnet.w1net import build_w1_uniform

rng = np.random.default_rng(0)

# %%
# A product gadget on (x, y) in R^2 x R^2, converted with two tokens.
mult = build_mult(2)
tf = transformerify(mult, 2)
x = rng.uniform(-1, 1, size=4)
print("network:    ", mult(x))
print("transformer:", tf(x))
print("blocks", len(tf.blocks), "heads per block", [len(b.heads) for b in tf.blocks])

# %%
# With zero queries and keys the masses are uniform whatever the tokens.
head = tf.blocks[-1].heads[0]
tokens = rng.normal(size=(2, head.token_dim))
_, masses = attention_eval(head, tokens[0], tokens)
print("attention masses:", masses)

# %%
# Widths that do not split into tokens are zero padded.
net = build_min(5)
tf = transformerify(net, 2, pad_input=True)
X = rng.uniform(size=(1000, 5))
print("min gadget, max difference:", np.abs(tf(X) - net(X)).max())
print("sizes:", tf.sizes(), "source nonzeros:", net.nonzero_param_count)

# %%
# The uniform-weight W1 network on three atoms in the plane.
w1 = build_w1_uniform(3, 2)
tf = transformerify(w1, 3)
X = rng.uniform(size=(2000, w1.input_dim))
print("W1 network, max difference:", np.abs(tf(X) - w1(X)).max())
print("nonzeros:", tf.nonzero_param_count, "vs", w1.nonzero_param_count)
