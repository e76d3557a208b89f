import numpy as np
import pytest

from picnet.harness.samples import make_rng, random_measure
from picnet.measures import ContextQuery


@pytest.fixture
def rng():
    return make_rng(20240611)


def random_pic(rng, C, N, d):
    return random_measure(rng, C, N, d)


def random_point(rng, C, N, d):
    return ContextQuery(random_measure(rng, C, N, d), rng.uniform(0.0, 1.0, size=d))


def gadget_zoo():
    """Named gadget networks with the token count used to convert each."""
    from picnet import netbuilder as nb

    return [
        ("abs", nb.build_abs(), 1),
        ("l1_norm", nb.build_l1_norm(4), 2),
        ("sq_l2_norm", nb.build_sq_l2_norm(3), 3),
        ("mult", nb.build_mult(3), 2),
        ("inner_product", nb.build_inner_product(2), 4),
        ("min", nb.build_min(5), 5),
        ("scalar_bump", nb.build_scalar_bump(0.2, 0.5), 1),
        ("bump", nb.build_bump(0.2, 0.5, 3), 3),
        ("product", nb.build_product(4), 2),
        ("threshold", nb.build_threshold(4), 1),
    ]
