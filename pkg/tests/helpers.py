import numpy as np

from rotornqs.model import RotorGraph
from rotornqs.rbm import RbmParams


def chain(n, h=5.0, beta=1.0):
    return RotorGraph(n, [(i, i + 1) for i in range(n - 1)], h, beta)


def random_params(rng, m, n, scale=0.7):
    return RbmParams(
        scale * rng.standard_normal((m, n)),
        scale * rng.standard_normal((m, 2)),
        scale * rng.standard_normal((n, 2)),
    )


# (criterion number, case) -> (status, title, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}


class criterion:
    """Record the outcome of one acceptance criterion, re-raising any failure."""

    def __init__(self, number, title, case=""):
        self.key = (number, case)
        self.title = title
        self.detail = []

    def note(self, text):
        self.detail.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        ACCEPTANCE[self.key] = (status, self.title, "; ".join(self.detail))
        return False
