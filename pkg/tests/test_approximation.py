from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heislab.approximation import (KERNELS, ApproximationError, HolderFit, SampledMap, bump_profile,
                                   contact_defect_rates, gromov_region, gromov_value, holder_fit, mollified_family,
                                   mollify, pullback_norm, sample_map, sample_on_cube, sample_on_sphere,
                                   sample_on_torus, sup_distance, target_distance)
from heislab.exterior_forms import DifferentialForm, contact_form
from heislab.gallery import get_map, identity_into_H, weierstrass_loop
from heislab.sphere_mesh import make_sphere_mesh


def _circle(s):
    return np.column_stack([np.cos(s[:, 0]), np.sin(s[:, 0])])


def test_bump_profile_support():
    r = np.linspace(0, 1.5, 31)
    b = bump_profile(r)
    assert np.all(b[r >= 1] == 0) and np.all(b[r < 1] > 0)
    for prof in KERNELS.values():
        assert np.all(np.diff(prof(np.linspace(0, 1, 20))) <= 0)


def test_sampled_map_validation():
    with pytest.raises(ApproximationError):
        SampledMap("torus", np.zeros((8, 2)), 0.1)
    with pytest.raises(ApproximationError):
        SampledMap("torus", np.full((32, 2), np.nan), 0.1)
    with pytest.raises(ApproximationError):
        SampledMap("disk", np.zeros((32, 2)), 0.1)


def test_spectral_derivative_exact_for_trig():
    sm = sample_on_torus(_circle, 1, 64)
    d = sm.derivatives()[:, :, 0]
    s = sm.grid()[:, 0]
    assert np.allclose(d, np.column_stack([-np.sin(s), np.cos(s)]), atol=1e-12)


def test_mollify_preserves_constants_and_linear_on_cube():
    sm = sample_on_cube(lambda p: np.column_stack([np.ones(len(p)), 2 * p[:, 0] - p[:, 1]]), 2, 65)
    out = mollify(sm, 0.2)
    inner = np.all(np.abs(sm.grid()) <= 1 - 0.2 - 1e-9, axis=-1)
    assert np.allclose(out.values[..., 0], 1.0)
    assert np.allclose(out.values[..., 1][inner], sm.values[..., 1][inner], atol=1e-12)


def test_mollify_circle_shrinks_by_eps_squared():
    sm = sample_on_torus(_circle, 1, 4096)
    shrink = [1 - np.linalg.norm(mollify(sm, e).values, axis=1).mean() for e in (0.2, 0.1)]
    assert shrink[0] / shrink[1] == pytest.approx(4.0, rel=0.05)


def test_mollify_undersampled():
    sm = sample_on_torus(_circle, 1, 64)
    with pytest.raises(ApproximationError):
        mollify(sm, sm.spacing)
    with pytest.raises(ApproximationError):
        mollify(sm, 0.5, kernel="gauss")


def test_mollify_on_sphere():
    mesh = make_sphere_mesh(2, 3)
    sm = sample_on_sphere(lambda x: x[:, 2:3] * 0 + 1.0, mesh)
    out = mollify(sm, 0.5)
    assert np.allclose(out.values, 1.0)
    with pytest.raises(ApproximationError):
        out.derivatives()


def test_family_sup_distance_decreases():
    sm = sample_map(weierstrass_loop(0.5), 4096)
    fam = mollified_family(sm, [0.4, 0.2, 0.1, 0.05])
    dist = [sup_distance(m, sm) for m in fam.maps]
    assert all(b < a for a, b in zip(dist, dist[1:]))
    with pytest.raises(ApproximationError):
        mollified_family(sm, [0.1, 0.2])
    with pytest.raises(ApproximationError):
        mollified_family(sm, [])


def test_pullback_norm_of_alpha_on_horizontal_velocity():
    vals = np.array([[1.0, 2.0, 0.0]])
    # X = (1, 0, -2y) is horizontal at (x, y, t)
    jac = np.array([[[1.0], [0.0], [-4.0]]])
    assert pullback_norm(vals, jac, contact_form(1))[0] == pytest.approx(0.0)
    jac2 = np.array([[[0.0], [0.0], [1.0]]])
    assert pullback_norm(vals, jac2, contact_form(1))[0] == pytest.approx(1.0)


def test_contact_defect_rates_lift():
    fam = mollified_family(sample_map(get_map("figure_eight_polygon"), 2 ** 13),
                           [0.2, 0.1, 0.05, 0.025])
    r = contact_defect_rates(fam, [contact_form(1)])
    assert r.slopes["form0"] == pytest.approx(1.0, abs=0.15)
    rows = list(r.rows())
    assert len(rows) == 4 and rows[0][2] == "form0"


def test_contact_defect_rates_identity_is_flat():
    fam = mollified_family(sample_map(identity_into_H(1), 48), [0.4, 0.3, 0.2])
    r = contact_defect_rates(fam, {"alpha": contact_form(1)})
    assert r.slopes["alpha"] == pytest.approx(0.0, abs=0.15)


def test_defect_floor_gives_nan():
    sm = sample_on_torus(lambda s: np.column_stack([np.cos(s[:, 0]), np.sin(s[:, 0]), 0 * s[:, 0]]), 1, 256)
    fam = mollified_family(sm, [0.4, 0.2])
    r = contact_defect_rates(fam, {"dt": DifferentialForm.basis(3, (2,))})
    assert np.isnan(r.slopes["dt"])


@pytest.mark.parametrize("name,metric,expected", [
    ("identity_H1", "koranyi", 0.5), ("identity_H1", "euclidean", 1.0),
    ("vertical_segment", "koranyi", 0.5), ("vertical_segment", "euclidean", 1.0),
    ("weierstrass_loop", "euclidean", 0.5)])
def test_holder_fit(name, metric, expected):
    fit = holder_fit(get_map(name), metric, 10_000, seed=3)
    assert fit.defined
    assert fit.exponent == pytest.approx(expected, abs=0.03)
    assert set(fit.to_json()) == {"gamma", "C", "metric", "residual", "defined", "pairs"}


def test_holder_fit_is_seeded():
    a = holder_fit(get_map("identity_H1"), "koranyi", 2000, seed=11)
    b = holder_fit(get_map("identity_H1"), "koranyi", 2000, seed=11)
    assert a == b


def test_holder_fit_argument_checks():
    with pytest.raises(ApproximationError):
        holder_fit(get_map("identity_H1"), "koranyi", 10, seed=0)
    with pytest.raises(ApproximationError):
        target_distance(np.zeros((2, 3)), np.ones((2, 3)), "taxicab")


def test_holder_fit_constant_map_undefined():
    from heislab.gallery import Domain, ParametricMap
    const = ParametricMap("const", Domain("interval", 1), lambda p: np.zeros((len(p), 3)), 3)
    fit = holder_fit(const, "euclidean", 2000, seed=0)
    assert not fit.defined and np.isnan(fit.exponent)
    assert isinstance(fit, HolderFit)


def test_gromov_examples():
    assert gromov_value(2, 0.9, 0.3) == Fraction(1, 10)
    assert gromov_region(2, 0.9, 0.3)
    # boundary point: exactly zero, not in the region
    assert gromov_value(2, 0.85, 0.3) == 0 and not gromov_region(2, 0.85, 0.3)
    assert gromov_region(1, 0.55, 0.1)
    assert not gromov_region(3, 0.6, 0.1)


def test_gromov_domain_checks():
    with pytest.raises(ApproximationError):
        gromov_value(0, 0.9, 0.3)
    with pytest.raises(ApproximationError):
        gromov_value(2, 0.5, 0.3)
    with pytest.raises(ApproximationError):
        gromov_value(2, 0.9, 0.0)


@settings(max_examples=200)
@given(st.integers(1, 6), st.integers(51, 100), st.integers(1, 100), st.integers(1, 100))
def test_gromov_matches_exact_decimal(k, g, t, dt):
    gamma, theta = g / 100, t / 100
    direct = 2 * Fraction(g, 100) + Fraction(t, 100) * (k - 1) - k
    assert gromov_value(k, gamma, theta) == direct
    # monotone in theta (and in gamma, since the coefficient of gamma is positive)
    if gromov_region(k, gamma, theta):
        assert gromov_region(k, gamma, (t + dt) / 100)


@pytest.mark.parametrize("name", sorted(__import__("heislab.gallery", fromlist=["REGISTRY"]).REGISTRY))
def test_gallery_tags_confirmed(name):
    m = get_map(name)
    for metric, gamma in m.tags.items():
        fit = holder_fit(m, metric, 10_000, seed=1)
        assert fit.exponent == pytest.approx(gamma, abs=0.07), (metric, fit)


def test_holder_fit_scale_consistency():
    from heislab.gallery import Domain, ParametricMap, vertical_segment
    base = vertical_segment(1.0)
    slow = ParametricMap("slow", Domain("interval", 1, 2.0), lambda p: base.func(p / 2), 3)
    a = holder_fit(base, "koranyi", 10_000, seed=4)
    b = holder_fit(slow, "koranyi", 10_000, seed=4)
    assert b.exponent == pytest.approx(a.exponent, abs=0.02)
    # d(f(x/2), f(y/2)) = C |x - y|^g 2^-g
    assert b.constant == pytest.approx(a.constant * 2 ** -a.exponent, rel=0.1)


def test_defect_slope_matches_holder_estimate():
    m = get_map("figure_eight_polygon")
    fit = holder_fit(m, "koranyi", 10_000, seed=2)
    assert fit.residual < 0.1
    fam = mollified_family(sample_map(m, 2 ** 13), [0.2, 0.1, 0.05, 0.025])
    slope = contact_defect_rates(fam, {"alpha": contact_form(1)}).slopes["alpha"]
    assert slope == pytest.approx(2 * fit.exponent - 1, abs=0.15)
