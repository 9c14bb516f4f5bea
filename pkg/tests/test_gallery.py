import numpy as np
import pytest

from heislab.gallery import (REGISTRY, Domain, GalleryError, figure_eight_lift, get_map, list_maps,
                             radial_extension, weierstrass_loop, weierstrass_sheet)
from heislab.heis_core import koranyi_dist

ALL = sorted(REGISTRY)


def test_registry_lists_everything():
    names = [n for n, _ in list_maps()]
    assert names == ALL
    with pytest.raises(GalleryError):
        get_map("nope")


@pytest.mark.parametrize("name", ALL)
def test_jacobian_matches_finite_differences(name):
    m = get_map(name)
    rng = np.random.default_rng(0)
    p = m.domain.sample(rng, 20)
    if m.domain.kind == "ball":
        p = p[np.linalg.norm(p, axis=1) > 0.05]
    if name == "figure_eight_polygon":
        # stay away from the corners of the bowtie
        p = (np.arange(1, 12) * 2 * np.pi / 12 + 0.1)[:, None]
    if m.domain.kind in ("ball", "cube") and name == "helix_fold_disk":
        p = p[np.abs(p[:, 0]) > 1e-3]
    J = m.jacobian(p)
    h = 1e-6 if "weierstrass" not in name else 1e-8
    fd = np.stack([(m(p + h * e) - m(p - h * e)) / (2 * h) for e in np.eye(m.domain.param_dim)], axis=-1)
    if m.domain.kind == "sphere":
        # compare along tangent directions only
        t = np.random.default_rng(1).standard_normal(p.shape)
        t -= np.sum(t * p, axis=1, keepdims=True) * p
        assert np.allclose(np.einsum("mnd,md->mn", J, t), np.einsum("mnd,md->mn", fd, t), atol=1e-5)
    else:
        scale = 1 + np.max(np.abs(J))
        assert np.max(np.abs(J - fd)) < 1e-4 * scale


@pytest.mark.parametrize("name", [n for n in ALL if get_map(n).horizontal])
def test_horizontal_maps_have_zero_contact_defect(name):
    m = get_map(name)
    p = m.domain.sample(np.random.default_rng(2), 500)
    if m.domain.kind == "ball":
        p = p[np.linalg.norm(p, axis=1) > 1e-3]
    assert np.max(np.abs(m.contact_defect(p))) < 1e-10


def test_figure_eight_crossing_heights():
    lem = figure_eight_lift()
    # both passes through the planar origin, s = 0 and s = pi
    pts = lem(np.array([[0.0], [np.pi]]))
    assert np.allclose(pts[:, :2], 0, atol=1e-15)
    assert pts[0, 2] == pytest.approx(0.0) and pts[1, 2] == pytest.approx(-8 / 3)
    poly = figure_eight_lift("polygon")
    assert sorted(np.round(poly(np.array([[0.0], [np.pi]]))[:, 2], 12)) == [-4.0, 0.0]
    with pytest.raises(GalleryError):
        figure_eight_lift("circle")


@pytest.mark.parametrize("shape", ["lemniscate", "polygon"])
def test_figure_eight_is_embedded(shape):
    m = figure_eight_lift(shape)
    s = np.linspace(0, 2 * np.pi, 600, endpoint=False)
    P = m(s[:, None])
    i, j = np.triu_indices(len(s), 1)
    gap = np.abs(s[i] - s[j])
    gap = np.minimum(gap, 2 * np.pi - gap)
    far = gap >= 0.1
    assert np.min(koranyi_dist(P[i[far]], P[j[far]])) > 0.05


def test_radial_extension():
    r = radial_extension(figure_eight_lift())
    x = np.array([[0.5, 0.0], [0.0, 2.0]])
    assert np.allclose(r(x), figure_eight_lift()(np.array([[0.0], [np.pi / 2]])))
    with pytest.raises(GalleryError):
        r(np.zeros((1, 2)))
    with pytest.raises(GalleryError):
        radial_extension(get_map("identity_H1"))


def test_domains():
    rng = np.random.default_rng(3)
    for d in (Domain("circle", 1), Domain("torus", 2), Domain("interval", 1, 2.0), Domain("cube", 3),
              Domain("ball", 2), Domain("sphere", 3)):
        r = np.full(50, 0.3)
        x, y = d.pairs_at_distance(rng, r)
        assert np.allclose(d.distance(x, y), 0.3)
    with pytest.raises(GalleryError):
        Domain("blob", 1).sample(rng, 3)


def test_weierstrass_validation():
    with pytest.raises(GalleryError):
        weierstrass_loop(0.0)
    assert weierstrass_sheet(0.7).domain.kind == "torus"


def test_smooth_versions():
    for name in ("hopf_map", "horizontal_disk", "identity_H2", "figure_eight_lift"):
        m = get_map(name)
        f = m.as_smooth_map()
        assert f.codomain_dim == m.target_dim


def test_radial_extension_examples():
    from heislab.exterior_forms import contact_form
    phi = figure_eight_lift()
    R = radial_extension(phi)
    x = np.random.default_rng(5).standard_normal((50, 2))
    assert np.allclose(R(x / 2), R(x))
    u = x / np.linalg.norm(x, axis=1, keepdims=True)
    assert np.allclose(R(u), phi(np.arctan2(u[:, 1], u[:, 0])[:, None] % (2 * np.pi)))
    assert np.max(np.abs(R.contact_defect(x))) < 1e-10


def test_figure_eight_closed():
    lem = figure_eight_lift()
    a, b = lem(np.array([[0.0], [2 * np.pi]]))
    assert abs(b[2] - a[2]) < 1e-12


def test_hopf_north_pole():
    h = get_map("hopf_map")
    assert np.allclose(h(np.array([[1.0, 0.0, 0.0, 0.0]])), [[0.0, 0.0, 1.0]])
