"""Seeded sample sets of context-query pairs.

Sampling uses numpy's PCG64 generator, ``np.random.Generator(np.random.PCG64(seed))``,
drawing in this order for each sample: the atoms (re-drawn until their pairwise
l1 separation is at least ``MIN_SEPARATION``), the index of the weight vector in
the lexicographic list of quantized weights, then the query.  Sample sets can
also be saved to JSON, so reproducing them elsewhere does not depend on the
generator.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from picnet.errors import ConfigurationError
from picnet.measures import ContextQuery, PICMeasure, enumerate_weights

MIN_SEPARATION = 1e-3
MAX_ATTEMPTS = 100_000


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def random_atoms(rng: np.random.Generator, N: int, d: int) -> np.ndarray:
    """N points uniform in [0, 1]^d with pairwise l1 distance at least MIN_SEPARATION."""
    for _ in range(MAX_ATTEMPTS):
        atoms = rng.uniform(0.0, 1.0, size=(N, d))
        if N == 1:
            return atoms
        gaps = np.abs(atoms[:, None, :] - atoms[None, :, :]).sum(axis=-1)
        if gaps[np.triu_indices(N, 1)].min() >= MIN_SEPARATION:
            return atoms
    raise ConfigurationError(f"no {N} separated atoms in [0,1]^{d} after {MAX_ATTEMPTS} draws")


def random_measure(rng: np.random.Generator, C: int, N: int, d: int, weights=None) -> PICMeasure:
    weights = enumerate_weights(C, N) if weights is None else weights
    if not weights:
        raise ConfigurationError(f"no positive weights with C={C} < N={N}")
    atoms = random_atoms(rng, N, d)
    return PICMeasure(atoms, weights[int(rng.integers(len(weights)))])


def generate_samples(config) -> list[ContextQuery]:
    """``config.num_samples`` seeded context-query pairs for ``(C, N, d)``."""
    rng = make_rng(config.seed)
    weights = enumerate_weights(config.C, config.N)
    out = []
    for _ in range(config.num_samples):
        context = random_measure(rng, config.C, config.N, config.d, weights)
        out.append(ContextQuery(context, rng.uniform(0.0, 1.0, size=config.d)))
    return out


def dumps_samples(samples: Sequence[ContextQuery]) -> str:
    return json.dumps([s.to_json() for s in samples])


def loads_samples(text: str) -> list[ContextQuery]:
    return [ContextQuery.from_json(obj) for obj in json.loads(text)]
