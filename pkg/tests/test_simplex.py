import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordelic.errors import SimplexError, SpecError
from ordelic.simplex import (
    LabeledDataset,
    as_simplex_point,
    as_simplex_points,
    empirical_conditional,
    from_ternary_plot,
    norm_distance,
    norm_order,
    sample_simplex,
    ternary_plot_coords,
)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])


def test_vertex_distances_attain_diameters():
    assert norm_distance(E1, E2, 1) == pytest.approx(2.0)
    assert norm_distance(E1, E2, 2) == pytest.approx(np.sqrt(2.0))
    assert norm_distance(E1, E2, "linf") == pytest.approx(1.0)


def test_distance_identity_and_symmetry():
    c = np.full(3, 1 / 3)
    for k in (1, 2, "linf"):
        assert norm_distance(c, c, k) == 0.0
    a, b = np.array([0.5, 0.3, 0.2]), np.array([0.1, 0.2, 0.7])
    assert norm_distance(a, b, 2) == norm_distance(b, a, 2)


def test_norm_order_parsing():
    assert norm_order("l1") == 1.0
    assert norm_order("L2") == 2.0
    assert norm_order("linf") == np.inf
    assert norm_order(np.inf) == np.inf
    with pytest.raises(SpecError):
        norm_order("l3")
    with pytest.raises(SpecError):
        norm_order(7)


def test_dimension_mismatch_rejected():
    with pytest.raises(SimplexError):
        norm_distance(E1, np.array([0.5, 0.5]), 2)


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_triangle_inequality(seed):
    a, b, c = sample_simplex(4, 3, seed)
    for k in (1, 2, np.inf):
        lhs = norm_distance(a, c, k)
        rhs = norm_distance(a, b, k) + norm_distance(b, c, k)
        assert lhs <= rhs + 1e-12


def test_as_simplex_point_accepts_within_tolerance():
    p = as_simplex_point(np.array([0.5, 0.5, 1e-13 - 1e-13]))
    assert p.sum() == pytest.approx(1.0, abs=0)
    q = as_simplex_point(np.array([0.3, 0.7 + 5e-13, -5e-13]))
    assert np.all(q >= 0)
    assert q.sum() == pytest.approx(1.0, abs=1e-15)


def test_as_simplex_point_rejects_outside_tolerance():
    with pytest.raises(SimplexError):
        as_simplex_point(np.array([0.6, 0.6, -0.2]))
    with pytest.raises(SimplexError):
        as_simplex_point(np.array([0.5, 0.4, 0.2]))
    with pytest.raises(SimplexError):
        as_simplex_point(np.array([1.0]))


def test_batch_validation_matches_scalar():
    P = np.array([[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]])
    out = as_simplex_points(P)
    assert out.shape == (2, 3)
    with pytest.raises(SimplexError):
        as_simplex_points(np.array([[0.2, 0.2, 0.2]]))


def test_sampling_is_deterministic_and_uniform():
    a = sample_simplex(3, 1000, seed=5)
    b = sample_simplex(3, 1000, seed=5)
    assert np.array_equal(a, b)
    big = sample_simplex(3, 100_000, seed=6)
    assert np.allclose(big.mean(axis=0), 1 / 3, atol=0.01)


def test_sampling_first_coordinate_beta_ks():
    n = 3
    x = np.sort(sample_simplex(n, 100_000, seed=9)[:, 0])
    # first coordinate of a uniform simplex point is Beta(1, n-1)
    cdf = 1.0 - (1.0 - x) ** (n - 1)
    emp = np.arange(1, len(x) + 1) / len(x)
    ks = np.max(np.abs(cdf - emp))
    assert ks < 0.01


def test_sampling_validates_inputs():
    with pytest.raises(SpecError):
        sample_simplex(1, 5, 0)
    with pytest.raises(SpecError):
        sample_simplex(3, 0, 0)


def test_ternary_plot_round_trip():
    pts = sample_simplex(3, 50, seed=2)
    xy = ternary_plot_coords(pts)
    back = from_ternary_plot(xy)
    assert np.allclose(back, pts, atol=1e-12)
    # vertex placement
    assert np.allclose(ternary_plot_coords(np.array([1.0, 0, 0])), [0, 0])
    assert np.allclose(ternary_plot_coords(np.array([0, 0, 1.0])), [1, 0])
    assert np.allclose(ternary_plot_coords(np.array([0, 1.0, 0])),
                       [0.5, np.sqrt(3) / 2])


def test_empirical_conditional_counts():
    data = LabeledDataset.from_rows([("a", 1), ("a", 1), ("a", 2)], n=3)
    cond, empty = empirical_conditional(data, lambda x: "bin")
    assert np.allclose(cond["bin"], [2 / 3, 1 / 3, 0.0])
    assert empty == []


def test_empirical_conditional_disjoint_bins():
    data = LabeledDataset.from_rows([("a", 1), ("b", 3)], n=3)
    cond, _ = empirical_conditional(data, {"a": "bin1", "b": "bin2"})
    assert np.allclose(cond["bin1"], [1, 0, 0])
    assert np.allclose(cond["bin2"], [0, 0, 1])


def test_empirical_conditional_reports_empty_bins():
    data = LabeledDataset.from_rows([("a", 1)], n=3)
    cond, empty = empirical_conditional(data, {"a": "used", "zzz": "unused"})
    assert "used" in cond
    assert empty == ["unused"]


def test_empirical_conditional_respects_weights():
    data = LabeledDataset(
        np.array(["a", "a"], dtype=object), np.array([1, 2]), 3,
        weights=np.array([3.0, 1.0]))
    cond, _ = empirical_conditional(data, lambda x: 0)
    assert np.allclose(cond[0], [0.75, 0.25, 0.0])


def test_dataset_validation():
    with pytest.raises(SpecError):
        LabeledDataset(np.array([], dtype=object), np.array([], dtype=int), 3)
    with pytest.raises(SpecError):
        LabeledDataset.from_rows([("a", 4)], n=3)
    with pytest.raises(SpecError):
        LabeledDataset.from_rows([("a", 0)], n=3)
    with pytest.raises(SpecError):
        LabeledDataset(np.array(["a"], dtype=object), np.array([1]), 3,
                       weights=np.array([-1.0]))


def test_exact_scenario_dataset():
    cond = np.array([[0.5, 0.25, 0.25], [0.0, 1.0, 0.0]])
    data = LabeledDataset.from_exact_scenario(["x", "y"], [0.4, 0.6], cond)
    got, _ = empirical_conditional(data, lambda x: x)
    assert np.allclose(got["x"], cond[0])
    assert np.allclose(got["y"], cond[1])
    # zero-probability (feature, label) pairs are not materialized
    assert len(data) == 4
