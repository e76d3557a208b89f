"""Layered networks with per-neuron trainable activations and exact gadget compilers."""

from picnet.netbuilder.core import (
    IDENTITY,
    RELU,
    REQU,
    ActivationParams,
    CompiledNet,
    Layer,
    compose,
    constant_net,
    eval_net,
    identity_net,
    linear_net,
    pad_depth,
    parallel_width_bound,
    parallelize,
    postcompose_linear,
    precompose_affine,
    select_inputs,
)
from picnet.netbuilder.gadgets import (
    bump_value,
    build_abs,
    build_bump,
    build_inner_product,
    build_l1_norm,
    build_min,
    build_mult,
    build_product,
    build_scalar_bump,
    build_sq_l2_norm,
    build_threshold,
    threshold_value,
)

__all__ = [
    "IDENTITY", "RELU", "REQU", "ActivationParams", "CompiledNet", "Layer",
    "compose", "constant_net", "eval_net", "identity_net", "linear_net", "pad_depth",
    "parallel_width_bound", "parallelize", "postcompose_linear", "precompose_affine",
    "select_inputs", "bump_value", "build_abs", "build_bump", "build_inner_product",
    "build_l1_norm", "build_min", "build_mult", "build_product", "build_scalar_bump",
    "build_sq_l2_norm", "build_threshold", "threshold_value",
]
