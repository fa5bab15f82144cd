import numpy as np
import pytest

from ordelic.embedding import build_envelope_loss, build_surrogate
from ordelic.normals import build_from_spec
from ordelic.properties import AffineBoundary, CostMatrix, spec_from_boundaries

EQ1_COSTS = [[0.0, 3.0, 5.0], [1.0, 0.0, 3.0], [3.0, 1.0, 0.0]]
EQ1_PHI = np.array([0.0, 1.0, 3.0])
SQ14 = np.sqrt(14.0)
O1 = np.array([-1.0, 3.0, 2.0]) / SQ14
O2 = np.array([-2.0, -1.0, 3.0]) / SQ14


@pytest.fixture(scope="session")
def fixture_cost() -> CostMatrix:
    return CostMatrix(EQ1_COSTS)


@pytest.fixture(scope="session")
def fixture_boundaries():
    # lower-report side is <c, p> <= b
    return [AffineBoundary([-3, 1, 0], -2.0), AffineBoundary([-5, -4, 0], -3.0)]


@pytest.fixture(scope="session")
def fixture_embedding(fixture_cost):
    return build_surrogate(build_envelope_loss(fixture_cost, EQ1_PHI, 3.0))


@pytest.fixture(scope="session")
def fixture_normals_spec(fixture_boundaries):
    return spec_from_boundaries(fixture_boundaries)


@pytest.fixture(scope="session")
def fixture_normals(fixture_normals_spec):
    return build_from_spec(fixture_normals_spec)


def bisect_expected_root(v_per_outcome, probs, lo=-20.0, hi=20.0, iters=80):
    """Independent vectorized bisection oracle for expected-identification
    roots; assumes a sign change on [lo, hi]."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))

    def ev(u):
        acc = np.zeros(len(probs))
        for y, v in enumerate(v_per_outcome):
            acc += probs[:, y] * v(u)
        return acc

    lo_v = np.full(len(probs), lo)
    hi_v = np.full(len(probs), hi)
    assert np.all(ev(lo_v) <= 0) and np.all(ev(hi_v) >= 0)
    for _ in range(iters):
        mid = 0.5 * (lo_v + hi_v)
        below = ev(mid) < 0
        lo_v = np.where(below, mid, lo_v)
        hi_v = np.where(below, hi_v, mid)
    return 0.5 * (lo_v + hi_v)
