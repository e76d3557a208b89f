"""Enumeration budgets for the combinatorial constructions.

Defaults can be overridden through the ``PICNET_BUDGET`` environment variable,
a comma separated list of ``key=value`` pairs, e.g.::

    PICNET_BUDGET="uniform_n=6,weight_pairs=400"
"""

import os

DEFAULTS = {
    # largest N for which the N!-permutation W1 net is compiled
    "uniform_n": 5,
    # largest number of (w, v) weight pairs in the all-weights W1 net
    "weight_pairs": 200,
    # largest number of candidate edge subsets scanned for transport vertices
    "vertex_candidates": 2_000_000,
}


def budget(key: str) -> int:
    raw = os.environ.get("PICNET_BUDGET", "").strip()
    overrides = {}
    if raw:
        for item in raw.split(","):
            name, _, value = item.partition("=")
            overrides[name.strip()] = int(value)
    if key in overrides:
        return overrides[key]
    return DEFAULTS[key]
