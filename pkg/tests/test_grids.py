import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spherank.geometry import random_rotation, tangent_decompose
from spherank.grids import (
    auto_factorization,
    check_factorization,
    equator_grid,
    fibonacci_sphere,
    plain_grid,
    structured_grid,
)
from spherank.models import f_star, sample_uniform

E3 = np.array([0.0, 0.0, 1.0])


def test_plain_grid_single_point():
    g = plain_grid(1, 3)
    assert g.points.shape == (1, 3)
    assert np.linalg.norm(g.points[0]) == pytest.approx(1.0, abs=1e-15)


def test_fibonacci_resultant():
    g = plain_grid(1000, 3, seed=123)
    assert np.linalg.norm(g.points.mean(axis=0)) < 0.01
    np.testing.assert_array_equal(g.points, fibonacci_sphere(1000))


def test_plain_grid_d5():
    g = plain_grid(1000, 5, seed=7)
    assert np.linalg.norm(g.points.mean(axis=0)) < 0.12
    np.testing.assert_allclose(np.linalg.norm(g.points, axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(g.points, plain_grid(1000, 5, seed=7).points)
    assert not np.array_equal(g.points, plain_grid(1000, 5, seed=8).points)


@pytest.mark.parametrize("n, d", [(0, 3), (5, 1)])
def test_plain_grid_invalid(n, d):
    with pytest.raises(ValueError):
        plain_grid(n, d)


def test_equator_examples():
    np.testing.assert_allclose(equator_grid(4, 3), [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    np.testing.assert_allclose(equator_grid(2, 3), [[1, 0], [-1, 0]], atol=1e-15)
    ang = np.arctan2(*equator_grid(50, 3)[:, ::-1].T)
    gaps = np.diff(np.unwrap(ang))
    np.testing.assert_allclose(gaps, 2 * math.pi / 50, atol=1e-12)


def test_equator_d2_and_higher():
    np.testing.assert_array_equal(equator_grid(2, 2), [[1.0], [-1.0]])
    with pytest.raises(ValueError):
        equator_grid(3, 2)
    eq = equator_grid(30, 5)
    assert eq.shape == (30, 4)
    np.testing.assert_allclose(np.linalg.norm(eq, axis=1), 1.0, atol=1e-12)


def test_structured_examples():
    g = structured_grid(E3, 1, 4, 0)
    assert g.points.shape == (4, 3)
    np.testing.assert_allclose(g.points[:, 2], 0.0, atol=1e-12)

    g = structured_grid(E3, 2, 2, 1)
    assert g.points.shape == (5, 3)
    np.testing.assert_array_equal(g.points[0], E3)
    np.testing.assert_allclose(g.latitudes, [1 / 3, -1 / 3], atol=1e-12)
    np.testing.assert_allclose(g.points[1:, 2], [1 / 3, 1 / 3, -1 / 3, -1 / 3], atol=1e-12)


def test_reference_factorization_accepted():
    check_factorization(40, 50, 1, 2001)
    g = structured_grid(E3, 40, 50, 1)
    assert g.n == 2001 and g.points.shape == (2001, 3)


@pytest.mark.parametrize("shape", [(2, 2, 2), (3, 1, 1), (0, 4, 0), (4, 4, -1)])
def test_factorization_violations(shape):
    with pytest.raises(ValueError):
        structured_grid(E3, *shape)


def test_factorization_mismatch():
    with pytest.raises(ValueError, match="does not factor"):
        check_factorization(4, 5, 0, 21)


def _check_structured(g, d):
    idx = np.arange(g.n)
    np.testing.assert_allclose(np.linalg.norm(g.points, axis=1), 1.0, atol=1e-10)
    ranks = g.rank_of(idx)
    body = idx[ranks > 0]
    lat = g.points[body] @ g.pole
    # 1 - F_*(latitude) = i / (n_R + 1)
    np.testing.assert_allclose(1 - f_star(np.clip(lat, -1, 1), d), ranks[body] / (g.n_R + 1), atol=1e-9)
    signs = g.signs()
    td = tangent_decompose(g.points[body], g.pole)
    np.testing.assert_allclose(td.sign, signs[body], atol=1e-9)
    np.testing.assert_array_equal(signs[ranks == 0], 0.0)
    # each latitude value appears exactly n_S times
    _, counts = np.unique(ranks[body], return_counts=True)
    assert np.all(counts == g.n_S) and counts.size == g.n_R


@pytest.mark.parametrize("d, shape", [(2, (5, 2, 1)), (3, (6, 7, 2)), (4, (5, 8, 3)), (6, (4, 4, 0))])
def test_structured_invariants(d, shape):
    rng = np.random.default_rng(d)
    for pole in sample_uniform(5, d, rng):
        _check_structured(structured_grid(pole, *shape), d)


def test_rank_and_meridian_indexing():
    g = structured_grid(E3, 3, 4, 2)
    idx = np.arange(g.n)
    np.testing.assert_array_equal(g.rank_of(idx), [0, 0] + [1] * 4 + [2] * 4 + [3] * 4)
    np.testing.assert_array_equal(g.meridian_of(idx), [-1, -1] + [0, 1, 2, 3] * 3)


def _sorted_dists(points):
    diff = points @ points.T
    return np.sort(diff[np.triu_indices(len(points), 1)])


def test_structured_equivariance():
    rng = np.random.default_rng(11)
    pole = sample_uniform(1, 3, rng)[0]
    g = structured_grid(pole, 5, 6, 1)
    for _ in range(5):
        o = random_rotation(3, rng)
        h = structured_grid(o @ pole, 5, 6, 1)
        np.testing.assert_allclose(np.sort(h.points @ h.pole), np.sort(g.points @ g.pole), atol=1e-9)
        np.testing.assert_allclose(_sorted_dists(h.points), _sorted_dists(g.points), atol=1e-9)


def test_auto_factorization_examples():
    assert auto_factorization(400) == (20, 20, 0)
    assert auto_factorization(100, d=2) == (50, 2, 0)
    assert auto_factorization(101, d=2) == (50, 2, 1)
    assert auto_factorization(1) == (1, 1, 0)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 5000), st.sampled_from([2, 3, 4]))
def test_auto_factorization_property(n, d):
    n_R, n_S, n_0 = auto_factorization(n, d)
    check_factorization(n_R, n_S, n_0, n)
    if d == 2:
        assert n_S <= 2
