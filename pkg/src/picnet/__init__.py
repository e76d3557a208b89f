"""Explicitly constructed networks for permutation-invariant contexts.

Submodules
----------
measures     quantized contexts, W1 / KR oracles
netbuilder   layered networks and exact gadgets
w1net        compiled Wasserstein-1 networks
partition    packings, cells and the piecewise-constant approximator
transformer  attention evaluation and MLP-to-transformer conversion
harness      samples, targets, experiments and the command line
"""

from picnet.errors import CapacityError, ConfigurationError

__version__ = "0.1.0"

__all__ = ["CapacityError", "ConfigurationError", "__version__"]
