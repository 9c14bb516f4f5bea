import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heislab.heis_core import (HeisenbergError, HeisenbergPoint, comparison_ratio_scan, comparison_ratios,
                               contact_form_at, dilation, group_inv, group_mul, horizontal_frame,
                               is_horizontal_velocity, koranyi_dist, koranyi_norm, random_points,
                               uniform_ball, vertical_field)

coord = st.floats(-50, 50, allow_nan=False)


def points(n=1):
    return arrays(np.float64, (2 * n + 1,), elements=coord)


def test_group_law_worked_example():
    # (1,0,0)*(0,1,0): t = -2 Im(1 * conj(i)) = 2
    assert np.array_equal(group_mul([1.0, 0, 0], [0, 1.0, 0]), [1.0, 1.0, 2.0])
    assert np.array_equal(group_mul([0, 1.0, 0], [1.0, 0, 0]), [1.0, 1.0, -2.0])


def test_identity_and_inverse():
    p = np.array([0.3, -1.2, 4.0, 2.0, 0.5])
    e = np.zeros(5)
    assert np.array_equal(group_mul(p, e), p)
    assert np.array_equal(group_mul(e, p), p)
    assert np.allclose(group_mul(p, group_inv(p)), e)


@given(points(), points(), points())
def test_associativity(a, b, c):
    lhs = group_mul(group_mul(a, b), c)
    rhs = group_mul(a, group_mul(b, c))
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.max(np.abs(lhs))))


@given(points(2), points(2))
def test_symmetry_is_exact(p, q):
    assert koranyi_dist(p, q) == koranyi_dist(q, p)


@given(points(), points(), points())
def test_triangle_inequality(p, q, r):
    d = koranyi_dist
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-9 * (1 + d(p, q) + d(q, r))


@given(points(), points(), points())
def test_left_invariance(g, p, q):
    base = koranyi_dist(p, q)
    moved = koranyi_dist(group_mul(g, p), group_mul(g, q))
    assert moved == pytest.approx(base, rel=1e-9, abs=1e-9)


@given(points(), points(), st.floats(0.01, 20))
def test_dilation_homogeneity(p, q, r):
    assert koranyi_dist(dilation(r, p), dilation(r, q)) == pytest.approx(r * koranyi_dist(p, q), rel=1e-9, abs=1e-12)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_vertical_distance_exact(t):
    assert koranyi_dist(np.zeros(3), np.array([0, 0, t])) == np.sqrt(abs(t))


def test_coordinatewise_variant_breaks_triangle():
    rng = np.random.default_rng(1)
    p, q, r = (rng.standard_normal((20000, 5)) for _ in range(3))
    d = lambda a, b: koranyi_dist(a, b, variant="coordinatewise")  # noqa: E731
    assert np.max(d(p, r) - d(p, q) - d(q, r)) > 0


def test_unknown_variant():
    with pytest.raises(HeisenbergError):
        koranyi_dist(np.zeros(3), np.ones(3), variant="cc")


def test_dimension_mismatch():
    with pytest.raises(HeisenbergError):
        group_mul(np.zeros(3), np.zeros(5))
    with pytest.raises(HeisenbergError):
        koranyi_dist(np.zeros(4), np.zeros(4))


def test_point_wrapper():
    p = HeisenbergPoint.of([1.0, 2.0, 3.0])
    assert p.n == 1 and p.t == 3.0 and np.array_equal(p.z, [1.0, 2.0])
    q = p * HeisenbergPoint.origin(1)
    assert isinstance(q, HeisenbergPoint) and q == p
    assert hash(q) == hash(p)
    with pytest.raises(HeisenbergError):
        HeisenbergPoint(1, [0.0, 1.0])
    with pytest.raises(HeisenbergError):
        HeisenbergPoint.of([np.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        p.coords[0] = 5.0


def test_norm_is_distance_to_origin():
    p = np.array([1.0, 1.0, 1.0])
    assert koranyi_norm(p) == koranyi_dist(p, np.zeros(3))
    assert koranyi_norm(p) == pytest.approx((4.0 + 1.0) ** 0.25)


def test_dilation_rejects_nonpositive():
    with pytest.raises(HeisenbergError):
        dilation(0.0, np.zeros(3))


@given(points(2))
def test_frame_spans_contact_kernel(p):
    fr = horizontal_frame(p)
    a = contact_form_at(p)
    assert np.allclose(fr.vectors @ a, 0.0)
    assert np.linalg.matrix_rank(fr.vectors) == 4
    assert np.dot(a, vertical_field(2)) == 1.0


def test_horizontal_velocity():
    p = np.array([1.0, 2.0, 0.0])
    X, Y = horizontal_frame(p).vectors
    assert is_horizontal_velocity(p, 3 * X - Y, 1e-12)
    assert not is_horizontal_velocity(p, X + vertical_field(1), 1e-6)
    with pytest.raises(HeisenbergError):
        is_horizontal_velocity(p, np.ones(5), 1e-6)


def test_uniform_ball_inside_radius():
    rng = np.random.default_rng(0)
    pts = uniform_ball(rng, 5000, 3, 2.0)
    r = np.linalg.norm(pts[:, 0], axis=1)
    assert r.max() <= 2.0
    # volume fraction within half radius is 1/8
    assert np.mean(r < 1.0) == pytest.approx(0.125, abs=0.02)


def test_comparison_scan_is_seeded_and_prefix_stable():
    a = comparison_ratio_scan(2000, 2.0, seed=5)
    b = comparison_ratio_scan(2000, 2.0, seed=5)
    c = comparison_ratio_scan(4000, 2.0, seed=5)
    assert a == b
    assert c.lower_ratio_max >= a.lower_ratio_max and c.upper_ratio_max >= a.upper_ratio_max
    assert a.pairs_used == 2000


def test_comparison_ratios_bounded():
    rng = np.random.default_rng(2)
    p, q = random_points(rng, 10000, 2, 3.0), random_points(rng, 10000, 2, 3.0)
    lo, up = comparison_ratios(p, q)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(up))
    assert lo.max() < 10 and up.max() < 10


def test_comparison_degenerate():
    with pytest.raises(HeisenbergError):
        comparison_ratios(np.ones((3, 3)), np.ones((3, 3)))
    with pytest.raises(HeisenbergError):
        comparison_ratio_scan(0, 1.0, seed=0)
