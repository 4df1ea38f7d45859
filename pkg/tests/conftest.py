import itertools
import math

import numpy as np
import pytest

from icgw.info import JointPmf


def brute_entropy(p: JointPmf, vars_) -> float:
    """Entropy by explicit enumeration of outcomes; independent of the library's tensor code."""
    acc: dict = {}
    for outcome in itertools.product(*(range(a) for a in p.arities)):
        key = tuple(outcome[v] for v in vars_)
        acc[key] = acc.get(key, 0.0) + float(p.tensor[outcome])
    return -sum(q * math.log2(q) for q in acc.values() if q > 0)


def h2(x: float) -> float:
    return -sum(q * math.log2(q) for q in (x, 1 - x) if q > 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
