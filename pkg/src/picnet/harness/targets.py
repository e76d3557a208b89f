"""Library of Lipschitz target maps from context-query pairs to output measures.

All three read the context through its uniform C-atom expansion, so they are
functions of the measure (not of the atom order), and their Lipschitz
constants with respect to ``W1 + l1`` are easy to state:

``mean_shift``
    M copies of ``mean(mu) + x``.  L = 1, because the l1 distance between
    means is bounded by W1 under the l1 ground cost.
``sorted_atoms``
    The expansion atoms themselves, each repeated M / C times.  L = 1.
``barycentric``
    The expansion atoms moved halfway toward the query, ``(z + x) / 2``.  L = 1/2.

Points are mapped to R^D by truncation or zero padding, which does not
increase l1 distances.
"""

from __future__ import annotations

import numpy as np

from picnet.errors import ConfigurationError
from picnet.measures import ContextQuery, OutputMeasure
from picnet.partition import TargetFunction

TARGETS = ("mean_shift", "sorted_atoms", "barycentric")


def _fit(points: np.ndarray, D: int) -> np.ndarray:
    d = points.shape[1]
    if D <= d:
        return points[:, :D]
    return np.pad(points, ((0, 0), (0, D - d)))


def target_library(name: str, M: int, D: int, C: int | None = None) -> TargetFunction:
    """Target named ``name`` with M output atoms in R^D.

    ``sorted_atoms`` and ``barycentric`` emit the C expansion atoms and need
    C to divide M.
    """
    if M < 1 or D < 1:
        raise ConfigurationError("M and D must be positive")
    if name == "mean_shift":
        def f(p: ContextQuery) -> OutputMeasure:
            mean = p.context.weights.as_array() @ p.context.atoms
            return OutputMeasure(np.repeat(_fit((mean + p.query)[None, :], D), M, axis=0))
        return TargetFunction(f, 1.0, name)
    if name not in TARGETS:
        raise ConfigurationError(f"unknown target {name!r}; choose from {', '.join(TARGETS)}")
    if C is None or M % C:
        raise ConfigurationError(f"target {name!r} needs M divisible by C (M={M}, C={C})")
    reps = M // C
    if name == "sorted_atoms":
        def f(p: ContextQuery) -> OutputMeasure:
            return OutputMeasure(np.repeat(_fit(p.context.expanded_atoms(), D), reps, axis=0))
        return TargetFunction(f, 1.0, name)

    def f(p: ContextQuery) -> OutputMeasure:
        moved = 0.5 * (p.context.expanded_atoms() + p.query)
        return OutputMeasure(np.repeat(_fit(moved, D), reps, axis=0))
    return TargetFunction(f, 0.5, name)
