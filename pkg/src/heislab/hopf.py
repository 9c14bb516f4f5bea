"""Hopf invariant of maps S^3 -> S^2: fiber linking and the form integral.

Fibers are preimages of regular values under the piecewise-linear
interpolation of vertex values on a tetrahedral mesh of S^3.  A fiber segment
is oriented so that ``(n, d, grad g_1, grad g_2)`` is a positive frame of R^4,
where ``n`` is the outward normal, ``d`` the segment direction and ``g_i`` the
components of the value in a positive basis of the tangent plane at ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exterior_forms import DifferentialForm, SmoothMap, coordinates, evaluate_form, exterior_d, pullback, wedge
from .linking import LinkingError, PLCurve, gauss_linking, min_curve_distance
from .sphere_mesh import SimplicialSphereMesh, integrate_pullback, make_sphere_mesh, radial_chart


class HopfError(ValueError):
    pass


class DegenerateValueError(HopfError):
    """A mesh vertex maps too close to the requested value; perturb and retry."""


@dataclass(frozen=True)
class SphereMapSample:
    mesh: SimplicialSphereMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if self.mesh.intrinsic_dim != 3:
            raise HopfError("maps S^3 -> S^2 need a mesh of S^3")
        if v.shape != (len(self.mesh.vertices), 3):
            raise HopfError("need one R^3 value per mesh vertex")
        if np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)) > 1e-12:
            raise HopfError("values must be unit vectors")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f, mesh: SimplicialSphereMesh) -> "SphereMapSample":
        v = np.asarray(f(mesh.vertices), dtype=float)
        return cls(mesh, v / np.linalg.norm(v, axis=1, keepdims=True))

    def max_spread(self) -> float:
        V = self.values[self.mesh.simplices]
        best = 0.0
        for i in range(4):
            for j in range(i + 1, 4):
                best = max(best, float(np.max(np.linalg.norm(V[:, i] - V[:, j], axis=1))))
        return best


def tangent_basis(p) -> np.ndarray:
    """``(e1, e2)`` spanning p-perp with ``det[p, e1, e2] > 0``."""
    p = np.asarray(p, dtype=float)
    p = p / np.linalg.norm(p)
    helper = np.eye(3)[np.argmin(np.abs(p))]
    e1 = np.cross(p, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return np.stack([e1, e2])


_FACES = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]


def extract_fiber(sample: SphereMapSample, p, vertex_gap: float = 1e-6,
                  max_spread: float = 0.5) -> List[PLCurve]:
    """Preimage of ``p`` under the PL map as oriented closed curves on S^3."""
    p = np.asarray(p, dtype=float)
    p = p / np.linalg.norm(p)
    vals = sample.values
    if np.min(np.linalg.norm(vals - p, axis=1)) < vertex_gap:
        raise DegenerateValueError("a vertex value lies within the gap of p; perturb p and retry")
    if sample.max_spread() >= max_spread:
        raise HopfError(f"value spread per tetrahedron {sample.max_spread():.3g} is too large; refine")
    E = tangent_basis(p)
    g = vals @ E.T  # (V, 2)
    front = vals @ p > 0
    X = sample.mesh.vertices
    S = sample.mesh.simplices

    # candidate tetrahedra: g changes sign in both components and some vertex faces p
    gs = g[S]
    cand = np.where(np.all(gs.min(axis=1) <= 0, axis=1) & np.all(gs.max(axis=1) >= 0, axis=1)
                    & np.any(front[S], axis=1))[0]
    points: Dict[Tuple[int, ...], np.ndarray] = {}
    succ: Dict[Tuple[int, ...], Tuple[int, ...]] = {}
    for t in cand:
        tet = S[t]
        hits = []
        for face in _FACES:
            vid = tet[list(face)]
            A = np.vstack([g[vid].T, np.ones(3)])
            try:
                lam = np.linalg.solve(A, np.array([0.0, 0.0, 1.0]))
            except np.linalg.LinAlgError:
                continue
            if np.all(lam >= 0) and lam @ vals[vid] @ p > 0:
                key = tuple(sorted(int(v) for v in vid))
                hits.append((key, lam @ X[vid]))
        if not hits:
            continue
        if len(hits) != 2:
            raise DegenerateValueError(f"tetrahedron {t} meets the fiber {len(hits)} times")
        P = X[tet]
        Ed = P[1:] - P[0]
        n = np.linalg.svd(Ed)[2][-1]
        if n @ P.mean(axis=0) < 0:
            n = -n
        dg = g[tet[1:]] - g[tet[0]]  # (3, 2)
        grads = Ed.T @ np.linalg.solve(Ed @ Ed.T, dg)  # (4, 2)
        (ka, pa), (kb, pb) = hits
        d = pb - pa
        if np.linalg.det(np.column_stack([n, d, grads])) < 0:
            (ka, pa), (kb, pb) = (kb, pb), (ka, pa)
        if ka in succ:
            raise DegenerateValueError("fiber branches at a face")
        succ[ka] = kb
        points[ka], points[kb] = pa, pb
    curves = []
    seen = set()
    for start in succ:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        cur = succ[start]
        while cur != start:
            if cur not in succ or cur in seen:
                raise DegenerateValueError("open fiber chain; the value is not regular for this mesh")
            chain.append(cur)
            seen.add(cur)
            cur = succ[cur]
        pts = np.array([points[k] for k in chain])
        curves.append(PLCurve(pts / np.linalg.norm(pts, axis=1, keepdims=True)))
    return curves


def stereographic(points: np.ndarray, pole) -> np.ndarray:
    """Orientation-preserving stereographic projection S^3 minus pole -> R^3."""
    P = np.asarray(pole, dtype=float)
    P = P / np.linalg.norm(P)
    B = np.linalg.svd(P[None])[2][1:]
    if np.linalg.det(np.vstack([P, B])) > 0:
        B[0] = -B[0]
    x = np.asarray(points, dtype=float)
    return (x @ B.T) / (1.0 - x @ P)[:, None]


class HopfResult(NamedTuple):
    value: float
    p: Tuple[float, ...]
    q: Tuple[float, ...]
    pole: Tuple[float, ...]
    fibers: Tuple[int, int]
    mesh_level: int

    def to_json(self, map_name: str = "") -> dict:
        return {"map": map_name, "p": list(self.p), "q": list(self.q), "value": self.value,
                "mesh_level": self.mesh_level, "pole": list(self.pole),
                "fiber_components": list(self.fibers)}


def _pole_distance(curves: Sequence[PLCurve], pole: np.ndarray) -> float:
    if not curves:
        return np.inf
    pts = np.concatenate([c.points for c in curves])
    return float(np.min(np.linalg.norm(pts - pole, axis=1)))


def choose_pole(curves: Sequence[PLCurve], seed: int = 0, tries: int = 64) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cands = rng.standard_normal((tries, 4))
    cands /= np.linalg.norm(cands, axis=1, keepdims=True)
    dist = [_pole_distance(curves, c) for c in cands]
    return cands[int(np.argmax(dist))]


def hopf_via_fibers(sample: SphereMapSample, p, q, pole=None, min_pole_distance: float = 0.1) -> HopfResult:
    p = np.asarray(p, dtype=float) / np.linalg.norm(p)
    q = np.asarray(q, dtype=float) / np.linalg.norm(q)
    if np.allclose(p, q):
        raise HopfError("p and q must differ")
    Fp, Fq = extract_fiber(sample, p), extract_fiber(sample, q)
    P = choose_pole(Fp + Fq) if pole is None else np.asarray(pole, dtype=float) / np.linalg.norm(pole)
    if min(_pole_distance(Fp, P), _pole_distance(Fq, P)) < min_pole_distance:
        raise HopfError("projection pole too close to a fiber; choose another pole")
    proj_p = [PLCurve(stereographic(c.points, P)) for c in Fp]
    proj_q = [PLCurve(stereographic(c.points, P)) for c in Fq]
    total = 0.0
    for a in proj_p:
        for b in proj_q:
            try:
                total += gauss_linking(a, b)
            except LinkingError as exc:
                raise HopfError(f"fibers intersect: {exc}") from None
    return HopfResult(total, tuple(p), tuple(q), tuple(P), (len(Fp), len(Fq)), sample.mesh.refinement_level)


# ---------------------------------------------------------------------------
# form integral


def sphere_area_form(scale: float = 1.0) -> DifferentialForm:
    """``scale (x dy^dz + y dz^dx + z dx^dy) / 4pi``: total integral ``scale`` on S^2."""
    x, y, z = coordinates(3)
    c = scale / (4 * np.pi)
    return DifferentialForm(3, 2, {(1, 2): x * c, (0, 2): y * -c, (0, 1): z * c})


def contact_primitive(c: float = 1.0) -> DifferentialForm:
    """``c (x1 dx2 - x2 dx1 + x3 dx4 - x4 dx3)`` on R^4."""
    x1, x2, x3, x4 = coordinates(4)
    return DifferentialForm.one_form([x2 * -c, x1 * c, x4 * -c, x3 * c])


def _tangent_frames(points: np.ndarray, rng) -> np.ndarray:
    """Two random orthonormal tangent vectors to S^3 at each point, ``(M, 2, 4)``."""
    out = np.empty((len(points), 2, 4))
    for i in range(2):
        v = rng.standard_normal(points.shape)
        v -= np.sum(v * points, axis=1, keepdims=True) * points
        for j in range(i):
            v -= np.sum(v * out[:, j], axis=1, keepdims=True) * out[:, j]
        out[:, i] = v / np.linalg.norm(v, axis=1, keepdims=True)
    return out


def primitive_defect(f: SmoothMap, eta: DifferentialForm, omega: DifferentialForm,
                     samples: int = 2000, seed: int = 0) -> float:
    """Sampled max of ``|d omega - f^* eta|`` on tangent 2-planes of S^3."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    W = _tangent_frames(x, rng)
    lhs = evaluate_form(exterior_d(omega), x, W)
    rhs = evaluate_form(pullback(f, eta), x, W)
    return float(np.max(np.abs(lhs - rhs)))


def calibrate_primitive(f: SmoothMap, eta: DifferentialForm, base: Optional[DifferentialForm] = None,
                        samples: int = 2000, seed: int = 0) -> float:
    """Least-squares ``c`` with ``d(c base) = f^* eta`` on tangent planes of S^3."""
    base = contact_primitive(1.0) if base is None else base
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    W = _tangent_frames(x, rng)
    a = evaluate_form(exterior_d(base), x, W)
    b = evaluate_form(pullback(f, eta), x, W)
    return float(a @ b / (a @ a))


def hopf_via_forms(f, eta: DifferentialForm, omega: DifferentialForm,
                   mesh: Optional[SimplicialSphereMesh] = None, tol: float = 1e-6) -> float:
    """``int_{S^3} omega ^ f^* eta`` after checking ``d omega = f^* eta`` on S^3."""
    f = f.as_smooth_map() if hasattr(f, "as_smooth_map") else f
    if f.domain_dim != 4 or f.codomain_dim != 3:
        raise HopfError("need a map R^4 -> R^3 restricted to S^3")
    if eta.dim != 3 or eta.degree != 2 or omega.dim != 4 or omega.degree != 1:
        raise HopfError("eta must be a 2-form on R^3 and omega a 1-form on R^4")
    defect = primitive_defect(f, eta, omega)
    if defect > tol:
        raise HopfError(f"omega is not a primitive of f^* eta on S^3 (defect {defect:.3g})")
    mesh = make_sphere_mesh(3, 3) if mesh is None else mesh
    integrand = wedge(omega, pullback(f, eta))
    return integrate_pullback(None, integrand, mesh)
