"""Linking numbers: Gauss integral, analytic linking through mollified
pullbacks, and the inductive construction of linking forms for S^0 and S^1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .approximation import (ApproximationError, SampledMap, mollify, pullback_norm,
                            sample_on_torus)
from .exterior_forms import (CallableField, DifferentialForm, SmoothMap, evaluate_form,
                             exterior_d)
from .sphere_mesh import (BallMesh, SimplicialSphereMesh, integrate_pullback, make_sphere_mesh,
                          richardson_limit)


class LinkingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class PLCurve:
    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or len(p) < 2:
            raise LinkingError("a curve needs at least two points in an (M, N) array")
        steps = np.linalg.norm(np.diff(p, axis=0), axis=1)
        if np.any(steps == 0):
            raise LinkingError("consecutive curve points must be distinct")
        if self.closed and np.array_equal(p[0], p[-1]):
            p = p[:-1]
        object.__setattr__(self, "points", p)

    def segments(self) -> Tuple[np.ndarray, np.ndarray]:
        p = self.points
        q = np.roll(p, -1, axis=0) if self.closed else p[1:]
        return (p if self.closed else p[:-1]), q

    def transformed(self, matrix=None, offset=None) -> "PLCurve":
        p = self.points
        if matrix is not None:
            p = p @ np.asarray(matrix, dtype=float).T
        if offset is not None:
            p = p + np.asarray(offset, dtype=float)
        return PLCurve(p, self.closed)

    def reversed(self) -> "PLCurve":
        return PLCurve(self.points[::-1], self.closed)

    def length(self) -> float:
        a, b = self.segments()
        return float(np.sum(np.linalg.norm(b - a, axis=1)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# closed={str(self.closed).lower()}\n")
        for row in self.points:
            buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PLCurve":
        closed = True
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "closed=" in line:
                    closed = line.split("closed=")[1].strip().lower() == "true"
                continue
            rows.append([float(x) for x in line.split(",")])
        return cls(np.array(rows), closed)


def circle_curve(m: int = 512, radius: float = 1.0, center=(0, 0, 0), normal_axis: int = 2) -> PLCurve:
    """Circle of ``m`` points in the coordinate plane orthogonal to ``normal_axis``."""
    s = 2 * np.pi * np.arange(m) / m
    p = np.zeros((m, 3))
    a, b = [i for i in range(3) if i != normal_axis]
    p[:, a], p[:, b] = radius * np.cos(s), radius * np.sin(s)
    return PLCurve(p + np.asarray(center, dtype=float))


def torus_link(p: int, q: int, m: int = 1024, R: float = 2.0, r: float = 1.0) -> Tuple[PLCurve, PLCurve]:
    """Two parallel (p/2, q/2) torus-knot strands forming a (p, q) torus link (p even)."""
    if p % 2:
        raise LinkingError("a two-component torus link needs even p")
    a, b = p // 2, q // 2
    out = []
    for shift in (0.0, np.pi / b if b else np.pi):
        s = 2 * np.pi * np.arange(m) / m
        phi, th = a * s, b * s + shift
        out.append(PLCurve(np.stack([(R + r * np.cos(th)) * np.cos(phi),
                                     (R + r * np.cos(th)) * np.sin(phi),
                                     r * np.sin(th)], axis=1)))
    return out[0], out[1]


def segment_distances(a0, a1, b0, b1) -> np.ndarray:
    """Minimum distances between segment arrays broadcast against each other."""
    d1, d2, r = a1 - a0, b1 - b0, a0 - b0
    a = np.sum(d1 * d1, -1)
    e = np.sum(d2 * d2, -1)
    f = np.sum(d2 * r, -1)
    c = np.sum(d1 * r, -1)
    b = np.sum(d1 * d2, -1)
    den = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 1e-300, np.clip((b * f - c * e) / den, 0, 1), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0, 1), np.where(t > 1, np.clip((b - c) / a, 0, 1), s))
        t = np.clip(t, 0, 1)
    diff = r + s[..., None] * d1 - t[..., None] * d2
    return np.linalg.norm(diff, axis=-1)


def min_curve_distance(a: PLCurve, b: PLCurve, chunk: int = 512) -> float:
    a0, a1 = a.segments()
    b0, b1 = b.segments()
    best = np.inf
    for i in range(0, len(a0), chunk):
        d = segment_distances(a0[i:i + chunk, None], a1[i:i + chunk, None], b0[None], b1[None])
        best = min(best, float(d.min()))
    return best


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def gauss_linking(a: PLCurve, b: PLCurve, min_distance: float = 1e-9, chunk: int = 256) -> float:
    """Gauss linking integral of two closed polygons in R^3.

    Each segment pair contributes its signed solid angle / 4pi in closed form,
    so the sum is exact for polygons up to round-off.
    """
    if a.points.shape[1] != 3 or b.points.shape[1] != 3:
        raise LinkingError("Gauss linking needs curves in R^3")
    if not (a.closed and b.closed):
        raise LinkingError("Gauss linking needs closed curves")
    if min_curve_distance(a, b) < min_distance:
        raise LinkingError("curves intersect (minimum distance below tolerance)")
    p1, p2 = a.segments()
    p3, p4 = b.segments()
    total = 0.0
    for i in range(0, len(p1), chunk):
        s1, s2 = p1[i:i + chunk, None], p2[i:i + chunk, None]
        r13, r14, r23, r24 = p3 - s1, p4 - s1, p3 - s2, p4 - s2
        n1 = _unit(np.cross(r13, r14))
        n2 = _unit(np.cross(r14, r24))
        n3 = _unit(np.cross(r24, r23))
        n4 = _unit(np.cross(r23, r13))
        om = sum(np.arcsin(np.clip(np.sum(u * v, -1), -1.0, 1.0))
                 for u, v in ((n1, n2), (n2, n3), (n3, n4), (n4, n1)))
        sgn = np.sign(np.sum(np.cross(p4 - p3, s2 - s1) * r13, -1))
        total += float(np.sum(om * sgn))
    return total / (4 * np.pi)


# ---------------------------------------------------------------------------
# smooth cutoffs


def _f(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def _df(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos]) / u[pos] ** 2
    return out


def smooth_step(u):
    """C^infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    a, b = _f(u), _f(1.0 - u)
    return a / (a + b)


def smooth_step_derivative(u):
    u = np.asarray(u, dtype=float)
    a, b = _f(u), _f(1.0 - u)
    da, db = _df(u), -_df(1.0 - u)
    return (da * (a + b) - a * (da + db)) / (a + b) ** 2


def _bump(center, inner, outer):
    """Radial cutoff: 1 for r <= inner, 0 for r >= outer, with its gradient."""
    c = np.asarray(center, dtype=float)
    width = outer - inner

    def val(x):
        r = np.linalg.norm(x - c, axis=1)
        return smooth_step((outer - r) / width)

    def grad(x):
        d = x - c
        r = np.linalg.norm(d, axis=1)
        g = -smooth_step_derivative((outer - r) / width) / width
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(r[:, None] > 0, d / r[:, None], 0.0)
        return g[:, None] * u

    return val, grad


class _ArcDistance:
    """Distance to a densely sampled polygonal arc with its gradient."""

    def __init__(self, pts: np.ndarray):
        self.pts = pts
        self.tree = cKDTree(pts)

    def __call__(self, x):
        _, idx = self.tree.query(x)
        best = np.full(len(x), np.inf)
        foot = np.zeros_like(x)
        n = len(self.pts)
        for lo in (idx - 1, idx):
            lo = np.clip(lo, 0, n - 2)
            a, b = self.pts[lo], self.pts[lo + 1]
            ab = b - a
            t = np.clip(np.sum((x - a) * ab, 1) / np.sum(ab * ab, 1), 0, 1)
            q = a + t[:, None] * ab
            d = np.linalg.norm(x - q, axis=1)
            better = d < best
            best[better] = d[better]
            foot[better] = q[better]
        return best, foot


# ---------------------------------------------------------------------------
# inductive linking forms


@dataclass
class LinkingForm:
    level: int
    omega: DifferentialForm
    eta: DifferentialForm
    support_gap: float
    integral: float
    tube_radius: float
    centers: np.ndarray = field(default=None, repr=False)
    arcs: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)
    previous: Optional["LinkingForm"] = field(default=None, repr=False)
    chi: Optional[object] = field(default=None, repr=False)


def _as_circle_map(phi) -> SmoothMap:
    if hasattr(phi, "as_smooth_map"):
        return phi.as_smooth_map()
    return phi


def _s0_images(phi) -> np.ndarray:
    if isinstance(phi, SmoothMap):
        if phi.domain_dim == 1:
            return phi(np.array([[-1.0], [1.0]]))
        if phi.domain_dim == 2:
            return phi(np.array([[-1.0, 0.0], [1.0, 0.0]]))
        raise LinkingError("S^0 images need a map on R^1 or R^2")
    pts = np.asarray(phi, dtype=float)
    if pts.ndim != 2 or len(pts) != 2:
        raise LinkingError("S^0 embedding must be two points, (phi(-1), phi(+1))")
    return pts


def _build_level0(images: np.ndarray, tau: float) -> LinkingForm:
    pm, pp = images
    N = images.shape[1]
    if np.linalg.norm(pp - pm) <= 8 * tau:
        raise LinkingError(
            f"separation {np.linalg.norm(pp - pm):.3g} of phi(+1), phi(-1) must exceed 8*tube_radius")
    vp, gp = _bump(pp, 2 * tau, 4 * tau)
    vm, gm = _bump(pm, 2 * tau, 4 * tau)
    w0 = CallableField(N, lambda x: vp(x) - vm(x), grad=lambda x: gp(x) - gm(x))
    omega = DifferentialForm(N, 0, {(): w0})
    eta = DifferentialForm(N, 1, {(i,): CallableField(N, (lambda i: lambda x: gp(x)[:, i] - gm(x)[:, i])(i))
                                  for i in range(N)})
    integral = float(w0(pp[None])[0] - w0(pm[None])[0])
    return LinkingForm(0, omega, eta, 2 * tau, integral, tau, centers=images)


def mv_induction_build(phi, k: int, tube_radius: float, samples: int = 1 << 14,
                       mesh_level: int = 9) -> LinkingForm:
    """Linking form for an embedded S^0 (k=0) or S^1 (k=1).

    k=0: ``omega_0 = psi_+ - psi_-`` with radial bumps equal to 1 within
    ``2 tau`` of ``phi(+1)``, ``phi(-1)`` and vanishing beyond ``4 tau``; its
    integral over S^0 is ``omega_0(phi(1)) - omega_0(phi(-1)) = 2``.

    k=1: ``phi`` maps the unit circle to R^N, S^0 = {(+-1, 0)}.  With ``chi``
    a smooth cutoff that is 1 near the upper arc and 0 near the lower one,
    ``eta_0`` splits as ``chi eta_0 + (1 - chi) eta_0`` and
    ``omega_1 = (1 - chi) eta_0``; ``eta_1 = d omega_1 = -d chi ^ eta_0``.
    """
    tau = float(tube_radius)
    if not tau > 0:
        raise LinkingError("tube_radius must be positive")
    if k == 0:
        return _build_level0(_s0_images(phi), tau)
    if k != 1:
        raise LinkingError("mv_induction_build supports k = 0 and k = 1")
    f = _as_circle_map(phi)
    if f.domain_dim != 2:
        raise LinkingError("k=1 needs a map defined on the unit circle in R^2")
    base = _build_level0(_s0_images(f), tau)
    N = f.codomain_dim
    s = np.linspace(0.0, np.pi, samples // 2 + 1)
    upper = f(np.stack([np.cos(s), np.sin(s)], axis=1))
    lower = f(np.stack([np.cos(-s), np.sin(-s)], axis=1))
    _check_margin(upper, lower, base.centers, tau)
    du, dl = _ArcDistance(upper), _ArcDistance(lower)

    def chi_parts(x):
        a, fa = du(x)
        b, fb = dl(x)
        u = (b - a) / tau
        with np.errstate(invalid="ignore", divide="ignore"):
            ga = np.where(a[:, None] > 0, (x - fa) / a[:, None], 0.0)
            gb = np.where(b[:, None] > 0, (x - fb) / b[:, None], 0.0)
        return smooth_step(u), smooth_step_derivative(u)[:, None] * (gb - ga) / tau

    eta0 = base.eta
    eta0_grad = base.omega.terms[()].grad

    def omega_coeff(i):
        return CallableField(N, lambda x: (1.0 - chi_parts(x)[0]) * eta0_grad(x)[:, i])

    omega = DifferentialForm(N, 1, {(i,): omega_coeff(i) for i in range(N)})

    def eta_coeff(i, j):
        def func(x):
            _, dchi = chi_parts(x)
            e = eta0_grad(x)
            return -(dchi[:, i] * e[:, j] - dchi[:, j] * e[:, i])
        return CallableField(N, func)

    eta = DifferentialForm(N, 2, {(i, j): eta_coeff(i, j) for i in range(N) for j in range(i + 1, N)})
    mesh = make_sphere_mesh(1, mesh_level)
    integral = integrate_pullback(f, omega, mesh)
    gap = _support_gap(eta, np.concatenate([upper, lower]), tau)
    return LinkingForm(1, omega, eta, gap, integral, tau, centers=base.centers,
                       arcs=(upper, lower), previous=base,
                       chi=chi_parts)


def _check_margin(upper, lower, centers, tau):
    far_u = np.min(np.linalg.norm(upper[:, None] - centers[None], axis=2), axis=1) > 4 * tau
    far_l = np.min(np.linalg.norm(lower[:, None] - centers[None], axis=2), axis=1) > 4 * tau
    tree_l, tree_u = cKDTree(lower), cKDTree(upper)
    if np.any(far_u) and tree_l.query(upper[far_u])[0].min() <= 2 * tau:
        raise LinkingError("hemisphere images come within 2*tube_radius of each other")
    if np.any(far_l) and tree_u.query(lower[far_l])[0].min() <= 2 * tau:
        raise LinkingError("hemisphere images come within 2*tube_radius of each other")


def _support_gap(eta: DifferentialForm, curve: np.ndarray, tau: float, tol: float = 1e-12,
                 shells: int = 24, per_shell: int = 4000, seed: int = 0) -> float:
    """Largest radius (multiple of tau/8) within which eta vanishes near the samples."""
    rng = np.random.default_rng(seed)
    gap = 0.0
    for j in range(1, shells + 1):
        r = j * tau / 8
        pick = curve[rng.integers(0, len(curve), per_shell)]
        d = rng.standard_normal(pick.shape)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = pick + r * rng.random((per_shell, 1)) * d
        if np.max(eta.pointwise_norm(pts)) > tol:
            break
        gap = r
    return gap


def mv_dual_loops(form: LinkingForm, m: int = 256) -> List[PLCurve]:
    """Closed loops carrying the flux of ``eta_1`` around phi(+1) and phi(-1).

    On the sphere of radius 3 tau about each centre the loop is the level set
    ``chi = 1/2``; it is oriented along the flux vector of ``eta_1`` so that the
    Gauss linking of a curve with the loops predicts its integral of ``omega_1``.
    """
    if form.level != 1 or form.chi is None:
        raise LinkingError("dual loops exist for k=1 linking forms")
    tau = form.tube_radius
    rad = 3 * tau
    loops = []
    upper, lower = form.arcs
    for c in form.centers:
        qu = upper[np.argmin(np.abs(np.linalg.norm(upper - c, axis=1) - rad))]
        ql = lower[np.argmin(np.abs(np.linalg.norm(lower - c, axis=1) - rad))]
        axis = _unit(qu - ql)
        helper = np.eye(3)[np.argmin(np.abs(axis))]
        e1 = _unit(np.cross(axis, helper))
        e2 = np.cross(axis, e1)

        def point(theta, az):
            return c + rad * (np.cos(theta) * axis + np.sin(theta) * (np.cos(az) * e1 + np.sin(az) * e2))

        def h(theta, az):
            return float(form.chi(point(theta, az)[None])[0][0]) - 0.5

        pts = []
        for az in 2 * np.pi * np.arange(m) / m:
            lo, hi = 1e-3, np.pi - 1e-3
            if h(lo, az) * h(hi, az) > 0:
                raise LinkingError("cutoff level set not found on the sampling sphere")
            pts.append(point(brentq(h, lo, hi, args=(az,), xtol=1e-13), az))
        pts = np.array(pts)
        tangent = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
        E = {k: f(pts) for k, f in form.eta.terms.items()}
        flux = np.stack([E.get((1, 2), 0 * pts[:, 0]), -E.get((0, 2), 0 * pts[:, 0]),
                         E.get((0, 1), 0 * pts[:, 0])], axis=1)
        if np.sum(flux * tangent) < 0:
            pts = pts[::-1]
        loops.append(PLCurve(pts))
    return loops


# ---------------------------------------------------------------------------
# analytic linking


class AnalyticLinking(NamedTuple):
    value: float
    cauchy_defects: List[float]
    values: List[float]
    eps: List[float]
    converged: bool
    note: str = ""


def _sampled_loop_integral(sm: SampledMap, omega: DifferentialForm) -> float:
    vals = sm.flat()
    jac = sm.derivatives().reshape(-1, sm.target_dim, 1)
    w = evaluate_form(omega, vals, np.transpose(jac, (0, 2, 1)))
    return float(np.sum(w) * sm.spacing)


def _check_support(omega: DifferentialForm, pts: np.ndarray, tol: float):
    eta = exterior_d(omega) if omega.is_polynomial else None
    if eta is None:
        return
    if np.max(eta.pointwise_norm(pts)) > tol:
        raise LinkingError("d(omega) does not vanish along the map (support violation)")


def analytic_linking(phi, omega: DifferentialForm, mesh: Optional[SimplicialSphereMesh] = None,
                     eps_list: Sequence[float] = (0.2, 0.1, 0.05), kernel="bump",
                     eta: Optional[DifferentialForm] = None, support_tol: float = 1e-9,
                     noise: float = 1e-10) -> AnalyticLinking:
    """Limit of ``int phi_eps^* omega`` over mollified maps.

    ``phi`` is a :class:`SmoothMap` (integrated directly on ``mesh``) or a
    sampled loop on the circle grid (``SampledMap`` with a one-dimensional
    torus domain), mollified at each eps.  ``eta`` (default ``d omega`` for
    polynomial forms) must vanish on the image.  Successive differences
    below ``noise * max(1, |value|)`` count as converged.
    """
    eps = [float(e) for e in eps_list]
    if len(eps) < 3:
        raise LinkingError("eps_list needs at least 3 entries")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise LinkingError("eps_list must be strictly decreasing")
    if isinstance(phi, SampledMap):
        if phi.domain != "torus" or phi.dim != 1:
            raise LinkingError("sampled maps must be loops on the circle grid")
        if omega.degree != 1:
            raise LinkingError("loops pair with 1-forms")
        pts = phi.flat()
        if eta is not None:
            if np.max(eta.pointwise_norm(pts)) > support_tol:
                raise LinkingError("eta does not vanish along the map (support violation)")
        else:
            _check_support(omega, pts, support_tol)
        values = []
        for e in eps:
            try:
                values.append(_sampled_loop_integral(mollify(phi, e, kernel), omega))
            except ApproximationError as exc:
                raise LinkingError(str(exc)) from None
    else:
        f = _as_circle_map(phi)
        if mesh is None:
            mesh = make_sphere_mesh(omega.degree, 7 if omega.degree == 1 else 3)
        check = integrate_pullback(f, omega, mesh)
        samples = f(mesh.vertices)
        if eta is not None:
            if np.max(eta.pointwise_norm(samples)) > support_tol:
                raise LinkingError("eta does not vanish along the map (support violation)")
        else:
            _check_support(omega, samples, support_tol)
        values = [check] * len(eps)
    defects = [abs(a - b) for a, b in zip(values, values[1:])]
    floor = noise * max(1.0, abs(values[-1]))
    eff = [max(d, floor) for d in defects]
    converged = all(b <= a for a, b in zip(eff, eff[1:]))
    value = values[-1]
    note = "" if converged else "no convergence evidence"
    if converged and defects and max(defects) > floor:
        try:
            lim = richardson_limit(list(zip(eps, values))).limit
            if np.isfinite(lim) and abs(lim - values[-1]) <= 2 * defects[-1]:
                value = lim
        except Exception:  # noqa: BLE001 - extrapolation is best effort
            pass
    return AnalyticLinking(float(value), defects, values, eps, converged, note)


# ---------------------------------------------------------------------------
# horizontality obstruction


def horizontality_obstruction_test(Phi, kappa: DifferentialForm, ball: BallMesh,
                                   eps_list: Sequence[float], kernel="bump",
                                   resolution: Optional[int] = None) -> List[Tuple[float, float]]:
    """``|int_{S^k} phi_eps^* kappa|`` for the boundary loop of a disk map.

    The boundary of ``ball`` (k = 1) fixes the loop parametrisation; the loop
    is sampled on a uniform angular grid (``resolution`` points, default 16
    times the boundary vertex count) and mollified at each eps.
    """
    if ball.intrinsic_dim != 2:
        raise LinkingError("obstruction test is implemented for disks (k = 1)")
    if kappa.degree != 1:
        raise LinkingError("kappa must be a 1-form on the target")
    f = _as_circle_map(Phi) if not hasattr(Phi, "domain") else Phi
    m = resolution or 16 * len(ball.sphere.vertices if ball.sphere is not None else ball.boundary().vertices)

    def loop(s):
        return f(np.column_stack([np.cos(s[:, 0]), np.sin(s[:, 0])]))

    target = getattr(f, "target_dim", getattr(f, "codomain_dim", None))
    if target != kappa.dim:
        raise LinkingError(f"map lands in R^{target}, form lives on R^{kappa.dim}")
    base = sample_on_torus(loop, 1, m)
    out = []
    for e in eps_list:
        sm = mollify(base, float(e), kernel)
        out.append((float(e), abs(_sampled_loop_integral(sm, kappa))))
    return out
