"""Oriented simplicial meshes of S^k (k = 1, 2, 3) and of the balls they bound.

A k-simplex ``(v_0, ..., v_k)`` of a sphere mesh is positively oriented when
``det[v_0, ..., v_k] > 0``; this is the boundary orientation induced from the
standard orientation of the ball (outward normal first).  Ball simplices are
oriented so that ``det[v_1 - v_0, ..., v_{k+1} - v_0] > 0``.

Integrals of forms over simplices use affine parametrisations of the reference
simplex, optionally composed with a chart (radial projection onto the sphere
for sphere meshes).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.special import roots_jacobi, roots_legendre

from .exterior_forms import DifferentialForm, SmoothMap, evaluate_form, exterior_d


class MeshError(ValueError):
    pass


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in barycentric coordinates ``(q, dim+1)``; weights sum to 1/dim!."""

    dim: int
    order: int
    nodes: np.ndarray
    weights: np.ndarray


def _perms(point: Sequence[float]) -> List[Tuple[float, ...]]:
    return sorted(set(itertools.permutations(point)))


def _symmetric(dim: int, order: int, groups) -> QuadratureRule:
    nodes, weights = [], []
    for pt, w in groups:
        for p in _perms(pt):
            nodes.append(p)
            weights.append(w)
    return QuadratureRule(dim, order, np.array(nodes), np.array(weights))


def _gauss_segment(m: int) -> QuadratureRule:
    x, w = roots_legendre(m)
    s = 0.5 * (x + 1.0)
    return QuadratureRule(1, 2 * m - 1, np.stack([1.0 - s, s], axis=1), 0.5 * w)


def stroud_rule(dim: int, m: int) -> QuadratureRule:
    """Conical product rule with ``m`` points per direction (exact to degree 2m-1)."""
    axes = []
    for i in range(dim):
        a = dim - 1 - i
        x, w = roots_jacobi(m, a, 0.0)
        axes.append((0.5 * (x + 1.0), w / 2.0 ** (a + 1)))
    nodes, weights = [], []
    for combo in itertools.product(range(m), repeat=dim):
        rest, lam, wt = 1.0, [], 1.0
        for i, j in enumerate(combo):
            u, w = axes[i][0][j], axes[i][1][j]
            lam.append(rest * u)
            rest *= 1.0 - u
            wt *= w
        nodes.append([rest] + lam)
        weights.append(wt)
    return QuadratureRule(dim, 2 * m - 1, np.array(nodes), np.array(weights))


def quadrature_rule(dim: int, order: int = 4) -> QuadratureRule:
    """Positive symmetric rule on the reference ``dim``-simplex exact to ``order``."""
    if dim == 0:
        return QuadratureRule(0, 99, np.ones((1, 1)), np.ones(1))
    if dim == 1 and order <= 5:
        return _gauss_segment(3)
    if dim == 2 and order <= 4:
        a, b = 0.445948490915965, 0.091576213509771
        return _symmetric(2, 4, [((a, a, 1 - 2 * a), 0.223381589678011 / 2),
                                 ((b, b, 1 - 2 * b), 0.109951743655322 / 2)])
    if dim == 3 and order <= 5:
        a, b, c = 0.0927352503108912, 0.3108859192633006, 0.4544962958743504
        return _symmetric(3, 5, [((a, a, a, 1 - 3 * a), 0.01224884051939366),
                                 ((b, b, b, 1 - 3 * b), 0.01878132095300264),
                                 ((c, c, 0.5 - c, 0.5 - c), 0.007091003462846911)])
    if dim > 3:
        raise MeshError(f"no quadrature for simplices of dimension {dim}")
    return stroud_rule(dim, math.ceil((order + 1) / 2))


# ---------------------------------------------------------------------------
# combinatorics


def boundary_chain(simplices: np.ndarray) -> Dict[Tuple[int, ...], int]:
    """Oriented boundary as a map from sorted face to integer coefficient."""
    out: Dict[Tuple[int, ...], int] = {}
    for s in np.asarray(simplices):
        s = tuple(int(v) for v in s)
        for i in range(len(s)):
            face = s[:i] + s[i + 1:]
            key = tuple(sorted(face))
            perm_sign = _perm_sign(face)
            sign = (-1) ** i * perm_sign
            out[key] = out.get(key, 0) + sign
    return {f: c for f, c in out.items() if c}


def _perm_sign(seq: Sequence[int]) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _orient_faces(chain: Dict[Tuple[int, ...], int]) -> np.ndarray:
    faces = []
    for f, c in chain.items():
        if abs(c) != 1:
            raise MeshError(f"face {f} has boundary multiplicity {c}")
        f = list(f)
        if c < 0 and len(f) > 1:
            f[0], f[1] = f[1], f[0]
        faces.append(f)
    return np.array(faces, dtype=int)


def _orientation_dets(vertices: np.ndarray, simplices: np.ndarray, sphere: bool) -> np.ndarray:
    P = vertices[simplices]
    if sphere:
        return np.linalg.det(P)
    return np.linalg.det(P[:, 1:] - P[:, :1])


def _fix_orientation(vertices, simplices, sphere: bool) -> np.ndarray:
    s = np.array(simplices, dtype=int)
    neg = _orientation_dets(vertices, s, sphere) < 0
    s[neg, 0], s[neg, 1] = s[neg, 1].copy(), s[neg, 0].copy()
    return s


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True)
class SimplicialSphereMesh:
    intrinsic_dim: int
    vertices: np.ndarray
    simplices: np.ndarray
    refinement_level: int = 0

    @property
    def ambient_dim(self) -> int:
        return self.intrinsic_dim + 1

    def reversed(self) -> "SimplicialSphereMesh":
        s = self.simplices.copy()
        if self.intrinsic_dim >= 1:
            s[:, [0, 1]] = s[:, [1, 0]]
        return SimplicialSphereMesh(self.intrinsic_dim, self.vertices, s, self.refinement_level)

    def faces(self, dim: int) -> np.ndarray:
        """Sorted unique ``dim``-faces (dim=1 gives edges)."""
        out = set()
        for s in self.simplices:
            for f in itertools.combinations(sorted(int(v) for v in s), dim + 1):
                out.add(f)
        return np.array(sorted(out), dtype=int)

    def euler_characteristic(self) -> int:
        return sum((-1) ** d * len(self.faces(d)) for d in range(self.intrinsic_dim + 1))

    def max_diameter(self) -> float:
        return _max_diameter(self.vertices, self.simplices)

    def is_closed_oriented(self) -> bool:
        return not boundary_chain(self.simplices)

    def orientation_ok(self) -> bool:
        return bool(np.all(_orientation_dets(self.vertices, self.simplices, True) > 0))

    def to_text(self) -> str:
        return mesh_to_text(self)


@dataclass(frozen=True)
class BallMesh:
    intrinsic_dim: int
    vertices: np.ndarray
    simplices: np.ndarray
    cone_face: np.ndarray  # (S, k+1) unit vertices of the sphere face each simplex lies over
    refinement_level: int = 0
    sphere: Optional[SimplicialSphereMesh] = field(default=None, repr=False)

    def max_diameter(self) -> float:
        return _max_diameter(self.vertices, self.simplices)

    def boundary(self) -> SimplicialSphereMesh:
        faces = _orient_faces(boundary_chain(self.simplices))
        used = np.unique(faces)
        remap = -np.ones(len(self.vertices), dtype=int)
        remap[used] = np.arange(len(used))
        return SimplicialSphereMesh(self.intrinsic_dim - 1, self.vertices[used], remap[faces],
                                    self.refinement_level)

    def volume(self) -> float:
        P = self.vertices[self.simplices]
        return float(np.sum(np.linalg.det(P[:, 1:] - P[:, :1]))) / math.factorial(self.intrinsic_dim)


def _max_diameter(vertices, simplices) -> float:
    P = vertices[simplices]
    best = 0.0
    for i, j in itertools.combinations(range(P.shape[1]), 2):
        best = max(best, float(np.max(np.linalg.norm(P[:, i] - P[:, j], axis=-1))))
    return best


def _project(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class _Midpoints:
    def __init__(self, vertices: List[np.ndarray]):
        self.vertices = vertices
        self.cache: Dict[Tuple[int, int], int] = {}

    def __call__(self, a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in self.cache:
            m = 0.5 * (self.vertices[a] + self.vertices[b])
            self.vertices.append(m / np.linalg.norm(m))
            self.cache[key] = len(self.vertices) - 1
        return self.cache[key]


def _icosahedron():
    g = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([[-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
                  [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
                  [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1]], dtype=float)
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    return _project(v), np.array(f)


def _sixteen_cell():
    v = np.concatenate([np.eye(4), -np.eye(4)])
    tets = [[i if s[i] > 0 else i + 4 for i in range(4)]
            for s in itertools.product((1, -1), repeat=4)]
    return v, np.array(tets)


def _refine_triangles(verts, tris):
    vl = list(verts)
    mid = _Midpoints(vl)
    out = []
    for a, b, c in tris:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(vl), np.array(out)


def _refine_tets(verts, tets):
    vl = list(verts)
    mid = _Midpoints(vl)
    out = []
    for a, b, c, d in tets:
        ab, ac, ad, bc, bd, cd = mid(a, b), mid(a, c), mid(a, d), mid(b, c), mid(b, d), mid(c, d)
        out += [(a, ab, ac, ad), (b, ab, bc, bd), (c, ac, bc, cd), (d, ad, bd, cd)]
        # inner octahedron split along its shortest diagonal
        diags = [(ab, cd, [ac, bc, bd, ad]), (ac, bd, [ab, bc, cd, ad]), (ad, bc, [ab, bd, cd, ac])]
        p, q, ring = min(diags, key=lambda t: np.linalg.norm(vl[t[0]] - vl[t[1]]))
        for i in range(4):
            out.append((p, q, ring[i], ring[(i + 1) % 4]))
    return np.array(vl), np.array(out)


def make_sphere_mesh(k: int, level: int, rotation: Optional[np.ndarray] = None) -> SimplicialSphereMesh:
    """Triangulated unit sphere S^k.

    k=1: regular 3*2^level-gon; k=2: icosahedron subdivided ``level`` times;
    k=3: 16-cell boundary, each tetrahedron split 1->8 ``level`` times.  All
    vertices are projected to the sphere.  ``rotation`` (orthogonal, det +1)
    moves the mesh off coordinate-aligned positions.
    """
    if level < 0:
        raise MeshError("level must be >= 0")
    if k == 1:
        m = 3 * 2 ** level
        ang = 2.0 * np.pi * np.arange(m) / m
        v = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        s = np.stack([np.arange(m), (np.arange(m) + 1) % m], axis=1)
    elif k == 2:
        v, s = _icosahedron()
        for _ in range(level):
            v, s = _refine_triangles(v, s)
    elif k == 3:
        v, s = _sixteen_cell()
        for _ in range(level):
            v, s = _refine_tets(v, s)
    else:
        raise MeshError(f"unsupported sphere dimension {k}; expected 1, 2 or 3")
    if rotation is not None:
        R = np.asarray(rotation, dtype=float)
        if R.shape != (k + 1, k + 1) or not np.allclose(R @ R.T, np.eye(k + 1), atol=1e-12):
            raise MeshError("rotation must be an orthogonal matrix of matching size")
        if np.linalg.det(R) < 0:
            raise MeshError("rotation must preserve orientation")
        v = v @ R.T
    v = _project(np.asarray(v, dtype=float))
    s = _fix_orientation(v, s, sphere=True)
    return SimplicialSphereMesh(k, v, s, level)


def random_rotation(dim: int, seed: int = 0) -> np.ndarray:
    from scipy.stats import special_ortho_group

    return special_ortho_group.rvs(dim, random_state=seed)


def make_ball_mesh(k: int, level: int, layers: Optional[int] = None,
                   rotation: Optional[np.ndarray] = None) -> BallMesh:
    """Ball B^{k+1} as a layered cone over ``make_sphere_mesh(k, level)``.

    ``layers`` radial shells (default 2^level) of equal thickness; prisms are
    split by global vertex order so neighbouring prisms match.
    """
    sphere = make_sphere_mesh(k, level, rotation)
    m = 2 ** level if layers is None else int(layers)
    if m < 1:
        raise MeshError("layers must be >= 1")
    V = sphere.vertices
    nv = len(V)
    verts = [np.zeros((1, k + 1))] + [(j / m) * V for j in range(1, m + 1)]
    verts = np.concatenate(verts)

    def gid(layer: int, i: int) -> int:
        return 1 + (layer - 1) * nv + i

    simplices, cone = [], []
    for f in sphere.simplices:
        fs = sorted(int(i) for i in f)
        simplices.append([0] + [gid(1, i) for i in fs])
        cone.append(f)
        for layer in range(1, m):
            lo = [gid(layer, i) for i in fs]
            hi = [gid(layer + 1, i) for i in fs]
            for i in range(k + 1):
                simplices.append(lo[: i + 1] + hi[i:])
                cone.append(f)
    simplices = _fix_orientation(verts, np.array(simplices), sphere=False)
    return BallMesh(k + 1, verts, simplices, V[np.array(cone)], level, sphere)


# ---------------------------------------------------------------------------
# text format


def mesh_to_text(mesh: SimplicialSphereMesh) -> str:
    lines = [f"SMESH {mesh.intrinsic_dim}", str(len(mesh.vertices)), str(len(mesh.simplices))]
    lines += [" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in s) for s in mesh.simplices]
    return "\n".join(lines) + "\n"


def mesh_from_text(text: str) -> SimplicialSphereMesh:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 2 or head[0] != "SMESH":
        raise MeshError("missing 'SMESH k' header")
    k, nv, ns = int(head[1]), int(lines[1]), int(lines[2])
    v = np.array([[float(x) for x in ln.split()] for ln in lines[3:3 + nv]]).reshape(nv, k + 1)
    s = np.array([[int(x) for x in ln.split()] for ln in lines[3 + nv:3 + nv + ns]]).reshape(ns, k + 1)
    return SimplicialSphereMesh(k, v, s)


# ---------------------------------------------------------------------------
# integration

Chart = Callable[[np.ndarray, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


def radial_chart(x: np.ndarray, E: np.ndarray, _aux=None):
    """Map ``x`` to ``x/|x|`` and push tangent vectors ``E`` (M, k, D) along."""
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    u = x / r
    proj = E - np.einsum("mkd,md->mk", E, u)[..., None] * u[:, None, :]
    return u, proj / r[:, None]


def cone_chart(x: np.ndarray, E: np.ndarray, gauge: np.ndarray):
    """``x -> g(x) x/|x|`` with g linear and 1 on the cone face: polyhedral ball -> round ball."""
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    u = x / r
    g = np.sum(gauge * x, axis=-1, keepdims=True)
    radial = E - np.einsum("mkd,md->mk", E, u)[..., None] * u[:, None, :]
    dg = np.einsum("mkd,md->mk", E, gauge)
    out = dg[..., None] * u[:, None, :] + (g / r)[:, None] * radial
    return g * u, out


def _as_map(f, dim: int) -> SmoothMap:
    if f is None:
        return SmoothMap.identity(dim)
    if hasattr(f, "as_smooth_map"):
        return f.as_smooth_map()
    return f


def integrate_simplices(f, a: DifferentialForm, vertices: np.ndarray, simplices: np.ndarray,
                        rule: Optional[QuadratureRule] = None, chart: Optional[Chart] = None,
                        chart_aux: Optional[np.ndarray] = None, chunk: int = 20000) -> float:
    """Sum over oriented simplices of the integral of ``f^* a``.

    ``chart(x, E, aux)`` optionally maps points and pushes tangent vectors
    before ``f`` is applied.
    """
    simplices = np.asarray(simplices)
    k = simplices.shape[1] - 1
    D = vertices.shape[1]
    if a.degree != k:
        raise MeshError(f"a {a.degree}-form cannot be integrated over {k}-simplices")
    f = _as_map(f, D)
    if f.domain_dim != D:
        raise MeshError(f"map has domain R^{f.domain_dim}, mesh lives in R^{D}")
    if f.codomain_dim != a.dim:
        raise MeshError(f"map lands in R^{f.codomain_dim}, form lives on R^{a.dim}")
    rule = rule or quadrature_rule(k)
    if rule.dim != k:
        raise MeshError("quadrature rule dimension does not match the simplices")
    q = len(rule.weights)
    total = 0.0
    per = max(1, chunk // q)
    for start in range(0, len(simplices), per):
        s = simplices[start:start + per]
        P = vertices[s]  # (S, k+1, D)
        E = P[:, 1:] - P[:, :1]  # (S, k, D)
        x = np.einsum("qi,sid->sqd", rule.nodes, P).reshape(-1, D)
        Et = np.repeat(E, q, axis=0)
        if chart is not None:
            aux = None if chart_aux is None else np.repeat(chart_aux[start:start + per], q, axis=0)
            x, Et = chart(x, Et, aux)
        y = f(x)
        if k:
            J = f.jacobian(x)
            W = np.einsum("mnd,mkd->mkn", J, Et)
        else:
            W = np.zeros((len(x), 0, a.dim))
        vals = evaluate_form(a, y, W).reshape(len(s), q)
        total += float(np.sum(vals @ rule.weights))
    return total


def integrate_pullback(f, a: DifferentialForm, mesh: SimplicialSphereMesh,
                       rule: Optional[QuadratureRule] = None, project: bool = True) -> float:
    """Integral of ``f^* a`` over the sphere.

    With ``project=True`` each simplex is parametrised through radial
    projection, so the integral is over the round sphere; otherwise over the
    inscribed polyhedron.
    """
    if a.degree != mesh.intrinsic_dim:
        raise MeshError(f"degree {a.degree} form over a {mesh.intrinsic_dim}-sphere")
    if mesh.intrinsic_dim == 0:
        raise MeshError("use a direct evaluation for S^0")
    return integrate_simplices(f, a, mesh.vertices, mesh.simplices, rule,
                               radial_chart if project else None)


def _gauges(ball: BallMesh) -> np.ndarray:
    W = ball.cone_face
    return np.linalg.solve(W, np.ones(W.shape[:2] + (1,)))[..., 0]


def integrate_ball(F, a: DifferentialForm, ball: BallMesh, rule: Optional[QuadratureRule] = None,
                   curved: bool = False) -> float:
    if curved:
        return integrate_simplices(F, a, ball.vertices, ball.simplices, rule, cone_chart, _gauges(ball))
    return integrate_simplices(F, a, ball.vertices, ball.simplices, rule)


def stokes_residual(F, omega: DifferentialForm, ball: BallMesh, rule: Optional[QuadratureRule] = None,
                    curved: bool = False) -> float:
    """``int_{S^k} F^* omega - int_{B^{k+1}} F^* d omega``.

    The boundary term is taken over the round sphere.  The volume term is over
    the polyhedral ball (``curved=False``), so the residual measures the
    O(h^2) gap between the two domains; with ``curved=True`` the ball is
    mapped onto the round ball and only quadrature error remains.
    """
    if omega.degree != ball.intrinsic_dim - 1:
        raise MeshError(f"need a {ball.intrinsic_dim - 1}-form on the boundary, got degree {omega.degree}")
    sphere = ball.sphere if ball.sphere is not None else ball.boundary()
    rule_b = None if rule is None or rule.dim != sphere.intrinsic_dim else rule
    rule_v = None if rule is None or rule.dim != ball.intrinsic_dim else rule
    bnd = integrate_pullback(F, omega, sphere, rule_b, project=True)
    vol = integrate_ball(F, exterior_d(omega), ball, rule_v, curved=curved)
    return bnd - vol


# ---------------------------------------------------------------------------
# extrapolation


class RichardsonResult(NamedTuple):
    limit: float
    order: float


def richardson_limit(values: Sequence[Tuple[float, float]]) -> RichardsonResult:
    """Least-squares fit ``value(h) = L + C h^q``; order is NaN for a constant sequence."""
    if len(values) < 3:
        raise MeshError("richardson_limit needs at least 3 (h, value) pairs")
    h = np.array([float(a) for a, _ in values])
    v = np.array([float(b) for _, b in values])
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise MeshError("h must be positive and strictly decreasing")
    scale = max(1.0, float(np.max(np.abs(v))))
    if np.ptp(v) <= 1e-14 * scale:
        return RichardsonResult(float(v[-1]), float("nan"))
    d1, d2 = v[-3] - v[-2], v[-2] - v[-1]
    q0 = 2.0
    if d1 * d2 > 0:
        q0 = float(np.clip(math.log(abs(d1 / d2)) / math.log(h[-3] / h[-2]), 0.25, 8.0))
    hs = h / h[-1]

    def resid(p):
        L, C, q = p
        return (L + C * hs ** q - v) / scale

    C0 = (v[0] - v[-1]) / (hs[0] ** q0 - 1.0) if hs[0] > 1 else 0.0
    sol = least_squares(resid, [v[-1] - C0, C0, q0], xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000)
    return RichardsonResult(float(sol.x[0]), float(sol.x[2]))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.abs(np.asarray(y, dtype=float)))
    return float(np.polyfit(lx, ly, 1)[0])
