import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heislab.exterior_forms import DifferentialForm, SmoothMap, coordinates
from heislab.sphere_mesh import (MeshError, boundary_chain, integrate_ball, integrate_pullback, loglog_slope,
                                 make_ball_mesh, make_sphere_mesh, mesh_from_text, mesh_to_text,
                                 quadrature_rule, random_rotation, richardson_limit, stokes_residual,
                                 stroud_rule)


def _moment(rule, exps):
    """Exact integral of prod lambda_i^a_i over the reference simplex."""
    num = math.prod(math.factorial(a) for a in exps)
    return num / math.factorial(sum(exps) + rule.dim)


@pytest.mark.parametrize("dim,order", [(1, 5), (2, 4), (3, 5), (2, 7), (3, 7)])
def test_quadrature_exactness(dim, order):
    rule = quadrature_rule(dim, order)
    assert rule.weights.sum() == pytest.approx(1 / math.factorial(dim), abs=1e-15)
    assert np.all(rule.weights > 0)
    for exps in np.ndindex(*(order + 1,) * (dim + 1)):
        if sum(exps) > order:
            continue
        val = np.sum(rule.weights * np.prod(rule.nodes ** np.array(exps), axis=1))
        assert val == pytest.approx(_moment(rule, exps), abs=1e-14)


def test_stroud_degree():
    r = stroud_rule(2, 3)
    assert r.order == 5 and len(r.weights) == 9


def test_quadrature_rejects_high_dim():
    with pytest.raises(MeshError):
        quadrature_rule(4)


@pytest.mark.parametrize("k,level", [(1, 0), (1, 3), (2, 0), (2, 2), (3, 0), (3, 1)])
def test_sphere_mesh_topology(k, level):
    m = make_sphere_mesh(k, level)
    assert m.is_closed_oriented()
    assert m.orientation_ok()
    assert m.euler_characteristic() == 1 + (-1) ** k
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0)


def test_refinement_shrinks_diameter():
    d = [make_sphere_mesh(2, L).max_diameter() for L in range(4)]
    assert all(b < 0.6 * a for a, b in zip(d, d[1:]))


def test_rotation_preserves_orientation():
    R = random_rotation(4, seed=3)
    assert np.allclose(R @ R.T, np.eye(4)) and np.linalg.det(R) == pytest.approx(1.0)
    m = make_sphere_mesh(3, 1, rotation=R)
    assert m.orientation_ok() and m.is_closed_oriented()


def test_reversed_mesh_negates_integrals():
    x, y, z = coordinates(3)
    vol = DifferentialForm.basis(3, (1, 2), x)
    m = make_sphere_mesh(2, 3)
    assert integrate_pullback(None, vol, m.reversed()) == pytest.approx(-integrate_pullback(None, vol, m))
    assert not m.reversed().orientation_ok()


def test_boundary_chain_of_closed_mesh_is_empty():
    assert boundary_chain(make_sphere_mesh(2, 1).simplices) == {}
    assert len(boundary_chain(np.array([[0, 1, 2]]))) == 3


def test_text_roundtrip():
    m = make_sphere_mesh(2, 1)
    back = mesh_from_text(mesh_to_text(m))
    assert back.intrinsic_dim == 2
    assert np.array_equal(back.simplices, m.simplices)
    assert np.allclose(back.vertices, m.vertices, rtol=0, atol=0)
    with pytest.raises(MeshError):
        mesh_from_text("garbage")


def test_circle_length():
    x, y = coordinates(2)
    form = DifferentialForm.one_form([y * -1, x])
    errs = [abs(integrate_pullback(None, form, make_sphere_mesh(1, L)) - 2 * np.pi) for L in (4, 6)]
    assert errs[0] < 1e-6 and errs[1] < 1e-10


def test_sphere_area():
    x, y, z = coordinates(3)
    flux = (DifferentialForm.basis(3, (1, 2), x) + DifferentialForm.basis(3, (2, 0), y)
            + DifferentialForm.basis(3, (0, 1), z))
    val = integrate_pullback(None, flux, make_sphere_mesh(2, 4))
    assert val == pytest.approx(4 * np.pi, rel=1e-6)


def test_s3_volume():
    coords = coordinates(4)
    B = DifferentialForm.basis
    form = DifferentialForm.zero(4, 3)
    for i in range(4):
        rest = tuple(j for j in range(4) if j != i)
        form = form + B(4, rest, coords[i] * (-1) ** i)
    val = integrate_pullback(None, form, make_sphere_mesh(3, 3))
    assert val == pytest.approx(2 * np.pi ** 2, rel=1e-4)


def test_ball_mesh_volume_and_boundary():
    ball = make_ball_mesh(1, 4)
    assert ball.volume() == pytest.approx(np.pi, rel=2e-2)
    assert ball.boundary().is_closed_oriented()
    ball3 = make_ball_mesh(2, 2)
    assert ball3.volume() == pytest.approx(4 * np.pi / 3, rel=0.1)


def test_degree_mismatch():
    with pytest.raises(MeshError):
        integrate_pullback(None, DifferentialForm.basis(3, (0,)), make_sphere_mesh(2, 0))
    with pytest.raises(MeshError):
        stokes_residual(None, DifferentialForm.basis(3, (0,)), make_ball_mesh(2, 0))


def test_stokes_flat_order_two():
    x, y = coordinates(2)
    om = DifferentialForm.one_form([x * 0, x])
    balls = [make_ball_mesh(1, L) for L in range(1, 5)]
    res = [stokes_residual(None, om, b) for b in balls]
    assert loglog_slope([b.max_diameter() for b in balls], res) == pytest.approx(2.0, abs=0.3)


def test_stokes_curved_is_quadrature_limited():
    x, y = coordinates(2)
    om = DifferentialForm.one_form([x * y * y, x ** 3])
    assert abs(stokes_residual(None, om, make_ball_mesh(1, 5), curved=True)) < 1e-6


def test_stokes_through_map():
    x, y = coordinates(2)
    F = SmoothMap.polynomial([x + y * y, y - x * x, x * y])
    a, b, c = coordinates(3)
    om = DifferentialForm.one_form([b, c * a, a * a])
    assert abs(stokes_residual(F, om, make_ball_mesh(1, 5), curved=True)) < 1e-5


def test_richardson_recovers_limit():
    hs = [0.4, 0.2, 0.1, 0.05]
    vals = [(h, 3.0 + 0.7 * h ** 2) for h in hs]
    res = richardson_limit(vals)
    assert res.limit == pytest.approx(3.0, abs=1e-10)
    assert res.order == pytest.approx(2.0, abs=1e-6)
    flat = richardson_limit([(h, 1.5) for h in hs])
    assert flat.limit == 1.5 and math.isnan(flat.order)
    with pytest.raises(MeshError):
        richardson_limit(vals[:2])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.01, 10.0))
def test_loglog_slope_power_law(p, c):
    x = np.array([1.0, 0.5, 0.25, 0.125])
    assert loglog_slope(x, c * x ** p) == pytest.approx(p, abs=1e-9)


def test_exact_form_over_closed_mesh_vanishes():
    x, y, z = coordinates(3)
    om = DifferentialForm.one_form([x * y, z * z, x * y * z])
    val = integrate_pullback(None, om.d(), make_sphere_mesh(2, 3))
    assert abs(val) < 1e-10


def test_stokes_curved_area_example():
    x, y = coordinates(2)
    om = DifferentialForm.one_form([x * 0, x])
    assert abs(stokes_residual(None, om, make_ball_mesh(1, 6), curved=True)) < 1e-8


def test_circle_richardson_limit():
    x, y = coordinates(2)
    form = DifferentialForm.one_form([y * -1, x])
    meshes = [make_sphere_mesh(1, L) for L in (2, 3, 4, 5)]
    vals = [(m.max_diameter(), integrate_pullback(None, form, m)) for m in meshes]
    assert richardson_limit(vals).limit == pytest.approx(2 * np.pi, abs=1e-8)
